/* HTML rendering. Pure string templates over the walk model so the
 * whole view layer is testable without a browser. main.ts owns the DOM
 * mounting and event wiring. */

import { fmtGain, fmtOutage, fmtPower, fmtScore } from "./format.js";
import { ScorePanel, StripCell, WalkState, bannerText } from "./walk.js";
import { PolicyInfo, SessionDict } from "./types.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(state: WalkState): string {
  const cls = state.trace !== null ? "banner done"
    : state.instruction === null ? "banner"
    : `banner ${state.instruction.action}`;
  return `<div class="${cls}">${esc(bannerText(state))}</div>`;
}

export function renderError(message: string | null): string {
  if (message === null) return `<div class="error hidden"></div>`;
  return `<div class="error">service error: ${esc(message)}` +
    ` <span class="hint">fix the report and resubmit</span></div>`;
}

export function renderStrip(cells: StripCell[]): string {
  const spans = cells.map(c =>
    `<span class="cell ${c.kind}" title="${esc(c.title)}"` +
    ` data-pos="${c.position}"></span>`);
  return `<div class="strip">${spans.join("")}</div>`;
}

export function renderTotals(session: SessionDict): string {
  const t = session.totals;
  const rows: [string, string][] = [
    ["relays", String(t.relay_count)],
    ["sum power", fmtPower(t.sum_power_mw)],
    ["max power", t.max_power_mw === 0 ? "-" : fmtPower(t.max_power_mw)],
    ["sum outage", fmtOutage(t.sum_outage)],
    ["cost (sum objective)", fmtScore(t.cost_sum)],
    ["cost (max objective)", fmtScore(t.cost_max)],
  ];
  const items = rows.map(([k, v]) =>
    `<div class="total"><span class="k">${k}</span>` +
    `<span class="v">${esc(v)}</span></div>`);
  return `<div class="totals">${items.join("")}</div>`;
}

export function renderPlacements(session: SessionDict): string {
  const rows = session.placements.map(p =>
    `<tr><td>${p.position}</td><td>relay</td>` +
    `<td>${esc(fmtPower(p.gamma_mw))}</td>` +
    `<td>${esc(fmtOutage(p.outage))}</td></tr>`);
  if (session.source !== null) {
    const s = session.source;
    rows.push(`<tr class="source-row"><td>${s.position}</td><td>source</td>` +
      `<td>${esc(fmtPower(s.gamma_mw))}</td>` +
      `<td>${esc(fmtOutage(s.outage))}</td></tr>`);
  }
  if (rows.length === 0) {
    return `<p class="muted">nothing placed yet</p>`;
  }
  return `<table class="placements"><thead><tr>` +
    `<th>position</th><th>node</th><th>power</th><th>outage</th>` +
    `</tr></thead><tbody>${rows.join("")}</tbody></table>`;
}

export function renderScorePanel(panel: ScorePanel): string {
  if (!panel.enabled) {
    return `<div class="scores disabled"><p>${esc(panel.note)}</p></div>`;
  }
  const parts: string[] = [`<p class="note">${esc(panel.note)}</p>`];

  if (panel.thresholds.length > 0 || panel.current !== null) {
    const th = panel.thresholds.map(t =>
      `<tr><td>${t.offset}</td><td>${fmtScore(t.threshold)}</td></tr>`);
    parts.push(`<table class="thresholds"><thead><tr>` +
      `<th>offset</th><th>place if score &le;</th></tr></thead>` +
      `<tbody>${th.join("")}</tbody></table>`);
    if (panel.current !== null) {
      const c = panel.current;
      parts.push(`<p class="current">offset ${c.offset}: score ` +
        `${fmtScore(c.score)} at ${esc(fmtPower(c.gamma_mw))} ` +
        (c.threshold === null
          ? `(forced offset)`
          : `vs threshold ${fmtScore(c.threshold)}`) +
        ` &rarr; <strong>${c.would_place ? "place" : "keep walking"}` +
        `</strong></p>`);
    }
  }

  if (panel.rows.length > 0) {
    const rows = panel.rows.map(r => {
      const starred = panel.chosen !== null
        && r.u === panel.chosen.u && r.gamma_mw === panel.chosen.gamma_mw;
      return `<tr class="${starred ? "chosen" : ""}">` +
        `<td>${starred ? "&#9733;" : ""}</td><td>${r.u}</td>` +
        `<td>${esc(fmtPower(r.gamma_mw))}</td>` +
        `<td>${fmtScore(r.score)}</td></tr>`;
    });
    parts.push(`<table class="score-rows"><thead><tr>` +
      `<th></th><th>offset u</th><th>power</th><th>score</th>` +
      `</tr></thead><tbody>${rows.join("")}</tbody></table>`);
    if (panel.decided !== null) {
      const w = panel.decided.window
        .map(e => `${e.offset}:${fmtGain(e.w)}`).join(", ");
      parts.push(`<p class="muted">window ${esc(w)}</p>`);
    }
  }
  return `<div class="scores">${parts.join("")}</div>`;
}

export function renderPolicyOption(p: PolicyInfo): string {
  return `<option value="${esc(p.policy_id)}" data-mode="${p.mode}">` +
    `${esc(p.policy_id)} (${esc(p.variant)}, A=${p.A} B=${p.B})</option>`;
}
