/**
 * Typed client for the /v1 session endpoints.
 *
 * Every call returns the server's authoritative payload; failures carry
 * the HTTP status and the server's `detail` string so the UI can show
 * them inline.  The fetch function is injectable for tests.
 */

import type { Choices, ForwardChoice, StateSnapshot, TraceEvent } from "./schema";

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export interface StepResult {
  state: StateSnapshot;
  event: TraceEvent;
}

export interface BatchResult {
  state: StateSnapshot;
  events: TraceEvent[];
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class DebugClient {
  private baseUrl: string;
  private fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn?: FetchFn) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (res.status === 204) return undefined as T;
    const data: unknown = await res.json().catch(() => ({}));
    if (!res.ok) {
      const detail = (data as { detail?: unknown })?.detail;
      throw new ApiError(res.status, typeof detail === "string" ? detail : res.statusText);
    }
    return data as T;
  }

  createSession(source: string, entry = "main/0"): Promise<{ id: string; state: StateSnapshot }> {
    return this.request("POST", "/v1/sessions", { source, entry });
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("GET", "/v1/sessions");
  }

  getState(id: string, withHistory = false): Promise<StateSnapshot> {
    const query = withHistory ? "?history=1" : "";
    return this.request("GET", `/v1/sessions/${id}/state${query}`);
  }

  getChoices(id: string): Promise<Choices> {
    return this.request("GET", `/v1/sessions/${id}/choices`);
  }

  step(id: string, choice: ForwardChoice): Promise<StepResult> {
    const body = choice.kind === "local"
      ? { kind: "local", pid: choice.pid }
      : { kind: "deliver", from: choice.from, to: choice.to };
    return this.request("POST", `/v1/sessions/${id}/step`, { choice: body });
  }

  bstep(id: string, pid: string): Promise<StepResult> {
    return this.request("POST", `/v1/sessions/${id}/bstep`, { pid });
  }

  rollback(id: string, pid: string, checkpoint: number): Promise<BatchResult> {
    return this.request("POST", `/v1/sessions/${id}/rollback`, { pid, checkpoint });
  }

  drive(id: string): Promise<BatchResult> {
    return this.request("POST", `/v1/sessions/${id}/drive`);
  }

  deleteSession(id: string): Promise<void> {
    return this.request("DELETE", `/v1/sessions/${id}`);
  }
}
