/* Thin fetch wrapper around the session protocol. Every method returns
 * parsed, schema-checked payloads; service errors are rethrown with the
 * server's own message so the UI can surface them verbatim. */

import { z } from "zod";
import {
  Instruction, MeasurementReport, PolicyInfo, Scores, SessionDict,
  SessionEvent, TraceDict,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public errorType: string,
    message: string,
    public status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

const ErrorBody = z.object({
  error: z.object({ type: z.string(), message: z.string() }),
});

const MeasurementResponse = z.object({
  instruction: Instruction,
  session: SessionDict,
});
export type MeasurementResponse = z.infer<typeof MeasurementResponse>;

const EndLineResponse = z.object({
  trace: TraceDict,
  session: SessionDict,
});
export type EndLineResponse = z.infer<typeof EndLineResponse>;

export class ApiClient {
  constructor(public base: string) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const res = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body: unknown = await res.json();
    if (!res.ok) {
      const parsed = ErrorBody.safeParse(body);
      if (parsed.success) {
        throw new ServiceError(parsed.data.error.type,
                               parsed.data.error.message, res.status);
      }
      throw new ServiceError("HTTPError", `status ${res.status}`, res.status);
    }
    return body;
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, { method: "POST", body: JSON.stringify(body) });
  }

  async version(): Promise<{ protocol_version: number }> {
    const doc = await this.request("/api/version");
    return z.object({ protocol_version: z.number() }).parse(doc);
  }

  async policies(): Promise<PolicyInfo[]> {
    const doc = await this.request("/api/policies");
    return z.object({ policies: z.array(PolicyInfo) }).parse(doc).policies;
  }

  async createSession(policyId: string, mode: string): Promise<SessionDict> {
    const doc = await this.post("/api/sessions",
                                { policy_id: policyId, mode });
    return z.object({ session: SessionDict }).parse(doc).session;
  }

  async getSession(id: string): Promise<SessionDict> {
    const doc = await this.request(`/api/sessions/${id}`);
    return z.object({ session: SessionDict }).parse(doc).session;
  }

  async postMeasurement(
    id: string, report: MeasurementReport, expectedSeq?: number,
  ): Promise<MeasurementResponse> {
    const body = expectedSeq === undefined
      ? report : { ...report, expected_seq: expectedSeq };
    const doc = await this.post(`/api/sessions/${id}/measurements`, body);
    return MeasurementResponse.parse(doc);
  }

  async endLine(
    id: string, finalOffset: number, report: MeasurementReport,
    expectedSeq?: number,
  ): Promise<EndLineResponse> {
    const body: Record<string, unknown> = {
      ...report, final_offset: finalOffset,
    };
    if (expectedSeq !== undefined) body.expected_seq = expectedSeq;
    const doc = await this.post(`/api/sessions/${id}/end-line`, body);
    return EndLineResponse.parse(doc);
  }

  async trace(id: string): Promise<TraceDict> {
    const doc = await this.request(`/api/sessions/${id}/trace`);
    return z.object({ trace: TraceDict }).parse(doc).trace;
  }

  async scores(id: string): Promise<Scores> {
    const doc = await this.request(`/api/sessions/${id}/scores`);
    return z.object({ scores: Scores }).parse(doc).scores;
  }

  async events(id: string): Promise<SessionEvent[]> {
    const doc = await this.request(`/api/sessions/${id}/events`);
    return z.object({ events: z.array(SessionEvent) }).parse(doc).events;
  }
}
