/* Browser wiring: holds the current WalkState, talks to the service,
 * re-renders after every confirmed response. No optimistic updates; the
 * view only ever shows what the service has acknowledged. */

import { ApiClient, ServiceError } from "./api.js";
import { MeasurementReport, PolicyInfo, Scores } from "./types.js";
import {
  WalkState, afterCreate, afterEnd, afterError, afterMeasurement,
  buildScorePanel, buildStrip,
} from "./walk.js";
import {
  renderBanner, renderError, renderPlacements, renderPolicyOption,
  renderScorePanel, renderStrip, renderTotals,
} from "./view.js";

const $ = (id: string) => document.getElementById(id)!;

let api = new ApiClient("");
let state: WalkState | null = null;
let scores: Scores | null = null;
let policies: PolicyInfo[] = [];

function render(): void {
  const walk = $("walk");
  if (state === null) {
    walk.classList.add("hidden");
    return;
  }
  walk.classList.remove("hidden");
  $("banner").innerHTML = renderBanner(state);
  $("strip").innerHTML = renderStrip(buildStrip(state.session));
  $("totals").innerHTML = renderTotals(state.session);
  $("placements").innerHTML = renderPlacements(state.session);
  $("scores").innerHTML = renderScorePanel(buildScorePanel(scores));
  $("error").innerHTML = renderError(state.error);
  $("session-id").textContent = state.session.id;
  const active = state.session.status === "active";
  ($("measure-form") as HTMLFieldSetElement).disabled = !active;
  ($("end-form") as HTMLFieldSetElement).disabled = !active;
}

function readReport(prefix: string): MeasurementReport {
  const w = (document.getElementById(`${prefix}-w`) as HTMLInputElement).value;
  if (w.trim() !== "") return { w: Number(w) };
  const rssi = Number(
    (document.getElementById(`${prefix}-rssi`) as HTMLInputElement).value);
  const probe = Number(
    (document.getElementById(`${prefix}-probe`) as HTMLInputElement).value);
  return { rssi_dbm: rssi, probe_power_dbm: probe };
}

function showError(e: unknown): void {
  const msg = e instanceof ServiceError ? e.message : String(e);
  if (state !== null) state = afterError(state, msg);
  else $("error").innerHTML = renderError(msg);
  render();
}

async function refreshScores(): Promise<void> {
  if (state === null) return;
  scores = await api.scores(state.session.id);
}

async function resumeSession(id: string): Promise<void> {
  const session = await api.getSession(id);
  state = afterCreate(session);
  await refreshScores();
  localStorage.setItem("relaydeploy-session", id);
  render();
}

async function init(): Promise<void> {
  api = new ApiClient(
    ($("base-url") as HTMLInputElement).value.replace(/\/$/, ""));
  policies = await api.policies();
  const select = $("policy") as HTMLSelectElement;
  select.innerHTML = policies.map(renderPolicyOption).join("");
  const saved = localStorage.getItem("relaydeploy-session");
  if (saved !== null) {
    try {
      await resumeSession(saved);
    } catch {
      localStorage.removeItem("relaydeploy-session");
    }
  }
}

function wire(): void {
  $("connect").addEventListener("click", () => init().catch(showError));

  $("create").addEventListener("click", async () => {
    try {
      const select = $("policy") as HTMLSelectElement;
      const opt = select.selectedOptions[0];
      if (opt === undefined) return;
      // mode comes from the policy listing; the client never guesses
      const session = await api.createSession(
        opt.value, opt.dataset.mode ?? "");
      state = afterCreate(session);
      scores = null;
      localStorage.setItem("relaydeploy-session", session.id);
      render();
    } catch (e) {
      showError(e);
    }
  });

  $("resume").addEventListener("click", () => {
    const id = ($("resume-id") as HTMLInputElement).value.trim();
    if (id !== "") resumeSession(id).catch(showError);
  });

  $("measure-form").addEventListener("submit", async ev => {
    ev.preventDefault();
    if (state === null) return;
    try {
      const res = await api.postMeasurement(
        state.session.id, readReport("m"), state.session.seq);
      state = afterMeasurement(state, res);
      await refreshScores();
      render();
    } catch (e) {
      showError(e);
    }
  });

  $("end-form").addEventListener("submit", async ev => {
    ev.preventDefault();
    if (state === null) return;
    try {
      const off = Number(($("end-offset") as HTMLInputElement).value);
      const res = await api.endLine(
        state.session.id, off, readReport("e"), state.session.seq);
      state = afterEnd(state, res);
      await refreshScores();
      render();
    } catch (e) {
      showError(e);
    }
  });

  $("refresh-scores").addEventListener("click", async () => {
    try {
      await refreshScores();
      render();
    } catch (e) {
      showError(e);
    }
  });
}

wire();
init().catch(() => { /* not connected yet; the connect button retries */ });
