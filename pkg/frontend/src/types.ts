/* Protocol types for the session service, with zod schemas so a
 * misbehaving server fails loudly instead of rendering garbage. Shapes
 * mirror the service JSON exactly; the client adds nothing. */

import { z } from "zod";

export const Placement = z.object({
  position: z.number().int(),
  gamma_mw: z.number(),
  outage: z.number(),
});
export type Placement = z.infer<typeof Placement>;

export const Totals = z.object({
  sum_power_mw: z.number(),
  max_power_mw: z.number(),
  sum_outage: z.number(),
  relay_count: z.number().int(),
  cost_sum: z.number(),
  cost_max: z.number(),
});
export type Totals = z.infer<typeof Totals>;

export const WindowEntry = z.object({
  offset: z.number().int(),
  w: z.number(),
});
export type WindowEntry = z.infer<typeof WindowEntry>;

export const SessionDict = z.object({
  id: z.string(),
  policy_id: z.string(),
  mode: z.enum(["no_backtracking", "backtracking"]),
  status: z.enum(["active", "completed"]),
  seq: z.number().int(),
  cursor: z.number().int(),
  prev_node: z.number().int(),
  next_measurement_offset: z.number().int().nullable(),
  window: z.array(WindowEntry),
  gamma_max_mw: z.number().nullable(),
  placements: z.array(Placement),
  source: Placement.nullable(),
  totals: Totals,
});
export type SessionDict = z.infer<typeof SessionDict>;

export const Instruction = z.object({
  action: z.enum(["advance", "place", "backtrack_place"]),
  steps: z.number().int().optional(),
  offset: z.number().int().optional(),
  position: z.number().int().optional(),
  steps_back: z.number().int().optional(),
  gamma_mw: z.number().optional(),
  outage: z.number().optional(),
  next_measurement_offset: z.number().int().nullable(),
});
export type Instruction = z.infer<typeof Instruction>;

export const TraceDict = z.object({
  placements: z.array(Placement),
  source: Placement.nullable(),
  totals: Totals,
});
export type TraceDict = z.infer<typeof TraceDict>;

export const PolicyInfo = z.object({
  policy_id: z.string(),
  variant: z.string(),
  mode: z.enum(["no_backtracking", "backtracking"]),
  A: z.number().int(),
  B: z.number().int(),
  xi_r: z.number(),
  xi_o: z.number(),
  theta: z.number(),
});
export type PolicyInfo = z.infer<typeof PolicyInfo>;

export const ScoreRow = z.object({
  u: z.number().int(),
  gamma_mw: z.number(),
  score: z.number(),
});
export type ScoreRow = z.infer<typeof ScoreRow>;

export const NoBtScores = z.object({
  kind: z.literal("no_backtracking"),
  thresholds: z.array(z.object({
    offset: z.number().int(),
    threshold: z.number(),
  })),
  current: z.object({
    offset: z.number().int(),
    score: z.number(),
    gamma_mw: z.number(),
    threshold: z.number().nullable(),
    would_place: z.boolean(),
  }).nullable(),
});
export type NoBtScores = z.infer<typeof NoBtScores>;

export const DecidedWindow = z.object({
  window: z.array(WindowEntry),
  gamma_max_mw: z.number().nullable(),
  chosen: z.object({ u: z.number().int(), gamma_mw: z.number() }),
  scores: z.array(ScoreRow),
});
export type DecidedWindow = z.infer<typeof DecidedWindow>;

export const BtScores = z.object({
  kind: z.literal("backtracking"),
  pending: z.array(ScoreRow),
  decided: DecidedWindow.nullable(),
});
export type BtScores = z.infer<typeof BtScores>;

export const Scores = z.discriminatedUnion("kind", [NoBtScores, BtScores]);
export type Scores = z.infer<typeof Scores>;

/* A measurement is reported either as a shadowing gain or as raw RSSI
 * plus the probe power it was received at; the service does the unit
 * work so the channel model lives in one place. */
export type MeasurementReport =
  | { w: number }
  | { rssi_dbm: number; probe_power_dbm: number };

export const SessionEvent = z.object({
  seq: z.number().int(),
  type: z.enum(["created", "measurement", "end"]),
  data: z.record(z.string(), z.unknown()),
});
export type SessionEvent = z.infer<typeof SessionEvent>;
