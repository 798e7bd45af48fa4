/**
 * Wire types for the debug service (schema v1).
 *
 * These mirror the JSON the server emits, field for field.  The client
 * renders these payloads verbatim and never computes successor states
 * itself; if the shape does not match, rendering stops at a banner
 * rather than guessing.
 */

export interface MsgView {
  id: number;
  value: string;
}

export interface HistEvent {
  kind: "tau" | "self" | "check" | "ckpt" | "rec" | "send" | "spawn" | "deliver";
  id?: number;
  to?: string;
  from?: string;
  child?: string;
  consumed?: number;
}

export interface ProcessView {
  pid: string;
  env: Record<string, string>;
  expr: string;
  mailbox: MsgView[];
  history_len: number;
  checkpoints: number[];
  mark: string[] | null;
  failure: string | null;
  history?: HistEvent[];
}

export interface GammaLane {
  from: string;
  to: string;
  messages: MsgView[];
}

export interface StateSnapshot {
  version: string;
  processes: ProcessView[];
  gamma: GammaLane[];
  next_pid: number;
  next_id: number;
}

export interface LocalChoice {
  kind: "local";
  pid: string;
}

export interface DeliverChoice {
  kind: "deliver";
  from: string;
  to: string;
  preview?: MsgView;
}

export type ForwardChoice = LocalChoice | DeliverChoice;

export interface BackwardChoice {
  pid: string;
  rule: string;
}

export interface Choices {
  forward: ForwardChoice[];
  backward: BackwardChoice[];
}

/** One line of the trace feed: a forward step, a backward rule, or a note. */
export interface TraceEvent {
  step: number;
  rule: string;
  dir?: "back";
  pid?: string;
  from?: string;
  to?: string;
  label?: Record<string, unknown>;
}

// ---------------------------------------------------------------------------
// Shape checks
// ---------------------------------------------------------------------------

const SCHEMA_VERSION = "v1";

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

/**
 * Returns a human-readable mismatch description, or null when the
 * payload is a usable v1 snapshot.
 */
export function snapshotMismatch(data: unknown): string | null {
  if (!isRecord(data)) return "state payload is not an object";
  if (data.version !== SCHEMA_VERSION) {
    return `unsupported state schema ${JSON.stringify(data.version)}, expected "${SCHEMA_VERSION}"`;
  }
  if (!Array.isArray(data.processes)) return "state payload has no process list";
  for (const p of data.processes) {
    if (!isRecord(p) || typeof p.pid !== "string" || typeof p.expr !== "string") {
      return "process entry is missing pid or control expression";
    }
    if (!Array.isArray(p.mailbox) || !Array.isArray(p.checkpoints)) {
      return `process ${String(p.pid)} is missing mailbox or checkpoint list`;
    }
  }
  if (!Array.isArray(data.gamma)) return "state payload has no transit queues";
  for (const lane of data.gamma) {
    if (!isRecord(lane) || typeof lane.from !== "string" || typeof lane.to !== "string"
        || !Array.isArray(lane.messages)) {
      return "transit queue entry is missing endpoints or messages";
    }
  }
  return null;
}

export function asSnapshot(data: unknown): StateSnapshot {
  const problem = snapshotMismatch(data);
  if (problem !== null) throw new Error(problem);
  return data as StateSnapshot;
}
