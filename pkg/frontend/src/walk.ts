/* Walk view model. Everything here is a pure function of service
 * responses; the client never decides anything itself, it only arranges
 * what the service said. That invariant is what makes the browser
 * client removable without changing any trace. */

import { fmtPower } from "./format.js";
import {
  DecidedWindow, Instruction, Scores, ScoreRow, SessionDict, TraceDict,
} from "./types.js";

export interface WalkState {
  session: SessionDict;
  instruction: Instruction | null;
  trace: TraceDict | null;
  error: string | null;
}

export function afterCreate(session: SessionDict): WalkState {
  return { session, instruction: null, trace: null, error: null };
}

export function afterMeasurement(
  state: WalkState,
  res: { instruction: Instruction; session: SessionDict },
): WalkState {
  return { ...state, session: res.session, instruction: res.instruction,
           error: null };
}

export function afterEnd(
  state: WalkState,
  res: { trace: TraceDict; session: SessionDict },
): WalkState {
  return { ...state, session: res.session, trace: res.trace,
           instruction: null, error: null };
}

/* Service errors are kept alongside an unchanged session so the form
 * can be resubmitted as-is. */
export function afterError(state: WalkState, message: string): WalkState {
  return { ...state, error: message };
}

export function bannerText(state: WalkState): string {
  if (state.trace !== null) {
    const t = state.trace.totals;
    return `line ended: ${t.relay_count} relays, sum power `
      + `${fmtPower(t.sum_power_mw)}, max ${fmtPower(t.max_power_mw)}`;
  }
  const ins = state.instruction;
  if (ins === null) {
    return `measure at offset ${state.session.next_measurement_offset}`;
  }
  const next = ins.next_measurement_offset === null
    ? "" : `, then measure at offset ${ins.next_measurement_offset}`;
  if (ins.action === "advance") {
    return `advance${next}`;
  }
  if (ins.action === "place") {
    return `place now at position ${ins.position} with `
      + `${fmtPower(ins.gamma_mw!)}${next}`;
  }
  const steps = ins.steps_back === 1 ? "1 step" : `${ins.steps_back} steps`;
  return `walk back ${steps}, place at position ${ins.position} with `
    + `${fmtPower(ins.gamma_mw!)}${next}`;
}

export type CellKind =
  | "sink" | "relay" | "source" | "cursor" | "window" | "step";

export interface StripCell {
  position: number;
  kind: CellKind;
  title: string;
}

/* One cell per line position, sink through the farthest known point.
 * Node markers win over the cursor, the cursor wins over buffered
 * window measurements. */
export function buildStrip(session: SessionDict): StripCell[] {
  const relays = new Map(session.placements.map(p => [p.position, p]));
  const windowAt = new Map(
    session.window.map(e => [session.prev_node + e.offset, e]));
  const cursorPos = session.next_measurement_offset === null
    ? null : session.prev_node + session.next_measurement_offset;
  let last = Math.max(
    0,
    cursorPos ?? 0,
    session.source?.position ?? 0,
    ...session.placements.map(p => p.position),
    ...[...windowAt.keys()],
  );
  const cells: StripCell[] = [];
  for (let pos = 0; pos <= last; pos++) {
    if (pos === 0) {
      cells.push({ position: 0, kind: "sink", title: "sink" });
    } else if (session.source !== null && pos === session.source.position) {
      cells.push({ position: pos, kind: "source",
                   title: `source, ${fmtPower(session.source.gamma_mw)}` });
    } else if (relays.has(pos)) {
      const p = relays.get(pos)!;
      cells.push({ position: pos, kind: "relay",
                   title: `relay, ${fmtPower(p.gamma_mw)}` });
    } else if (pos === cursorPos) {
      cells.push({ position: pos, kind: "cursor",
                   title: "measure here next" });
    } else if (windowAt.has(pos)) {
      const e = windowAt.get(pos)!;
      cells.push({ position: pos, kind: "window",
                   title: `measured w=${e.w}` });
    } else {
      cells.push({ position: pos, kind: "step", title: `step ${pos}` });
    }
  }
  return cells;
}

export interface ScorePanel {
  enabled: boolean;
  note: string;
  /* backtracking panels */
  rows: ScoreRow[];
  chosen: { u: number; gamma_mw: number } | null;
  decided: DecidedWindow | null;
  /* no-backtracking panels */
  thresholds: { offset: number; threshold: number }[];
  current: NoBtCurrent | null;
}

export interface NoBtCurrent {
  offset: number;
  score: number;
  gamma_mw: number;
  threshold: number | null;
  would_place: boolean;
}

/* Arrange the service's what-if scores for display: ascending by score,
 * chosen pair first once a window has been decided. */
export function buildScorePanel(scores: Scores | null): ScorePanel {
  const empty: ScorePanel = {
    enabled: false, note: "no scores yet", rows: [], chosen: null,
    decided: null, thresholds: [], current: null,
  };
  if (scores === null) return empty;

  if (scores.kind === "no_backtracking") {
    return {
      ...empty,
      enabled: true,
      note: scores.current === null
        ? "no measurement reported yet" : "current measurement",
      thresholds: scores.thresholds,
      current: scores.current,
    };
  }

  const pending = scores.pending.length > 0;
  const source = pending
    ? scores.pending
    : (scores.decided !== null ? scores.decided.scores : []);
  if (source.length === 0) return { ...empty, note: "window is empty" };
  const chosen = pending ? null : scores.decided!.chosen;
  const rows = [...source].sort((a, b) => a.score - b.score);
  if (chosen !== null) {
    const i = rows.findIndex(
      r => r.u === chosen.u && r.gamma_mw === chosen.gamma_mw);
    if (i > 0) rows.unshift(...rows.splice(i, 1));
  }
  return {
    ...empty,
    enabled: true,
    note: pending ? "pending window (undecided)" : "last decided window",
    rows,
    chosen,
    decided: scores.decided,
  };
}
