/**
 * Session controller: one debug session per tab.
 *
 * The controller owns exactly two pieces of state, the session id and
 * the event feed; everything rendered comes from the latest server
 * payloads.  Actions run strictly one at a time and every mutation
 * waits for the server's answer before the view changes, so there is
 * no optimistic rendering to roll back.  Endpoint failures (409 choice
 * gone, 422 bad input, 500 stuck rollback) become an inline notice and
 * the session keeps going.
 */

import { ApiError, DebugClient } from "./api";
import type { Choices, ForwardChoice, TraceEvent } from "./schema";
import { buildViewModel, render, type Notice } from "./view";

export type UserAction =
  | { kind: "step"; choice: ForwardChoice }
  | { kind: "rollback"; pid: string; checkpoint: number }
  | { kind: "bstep"; pid: string }
  | { kind: "drive" }
  | { kind: "reset" };

export interface AppConfig {
  root: HTMLElement;
  client: DebugClient;
  source: string;
  entry?: string;
}

const NO_CHOICES: Choices = { forward: [], backward: [] };

export class App {
  readonly root: HTMLElement;
  readonly client: DebugClient;
  readonly source: string;
  readonly entry: string;

  sessionId: string | null = null;
  feed: TraceEvent[] = [];

  private notice: Notice | null = null;
  private lastState: unknown = null;
  private lastChoices: Choices = NO_CHOICES;
  private queue: Promise<void> = Promise.resolve();

  constructor(config: AppConfig) {
    this.root = config.root;
    this.client = config.client;
    this.source = config.source;
    this.entry = config.entry ?? "main/0";
    this.root.addEventListener("click", (ev) => this.onClick(ev));
  }

  /** Create the session and draw the initial view. */
  start(): Promise<void> {
    this.queue = this.queue.then(() => this.createSession());
    return this.queue;
  }

  /** Resolves once every queued action has been answered and drawn. */
  whenIdle(): Promise<void> {
    return this.queue;
  }

  /** Queue one user action; used by the click handler and by tests. */
  applyUserAction(action: UserAction): Promise<void> {
    this.queue = this.queue.then(() => this.runAction(action));
    return this.queue;
  }

  // -- internals ------------------------------------------------------------

  private async createSession(): Promise<void> {
    this.feed = [];
    this.notice = null;
    const { id } = await this.client.createSession(this.source, this.entry);
    this.sessionId = id;
    await this.refresh();
  }

  private async runAction(action: UserAction): Promise<void> {
    if (this.sessionId === null) return;
    this.notice = null;
    try {
      switch (action.kind) {
        case "step": {
          const res = await this.client.step(this.sessionId, action.choice);
          this.feed.push(res.event);
          break;
        }
        case "rollback":
          await this.client.rollback(this.sessionId, action.pid, action.checkpoint);
          break;
        case "bstep": {
          const res = await this.client.bstep(this.sessionId, action.pid);
          this.feed.push(res.event);
          break;
        }
        case "drive": {
          const res = await this.client.drive(this.sessionId);
          this.feed.push(...res.events);
          break;
        }
        case "reset": {
          const old = this.sessionId;
          this.sessionId = null;
          await this.client.deleteSession(old);
          await this.createSession();
          return;
        }
      }
    } catch (err) {
      if (err instanceof ApiError) {
        this.notice = { status: err.status, text: err.detail };
      } else {
        this.notice = { status: 0, text: String(err) };
        this.draw();
        return;
      }
    }
    await this.refresh();
  }

  private async refresh(): Promise<void> {
    if (this.sessionId === null) {
      this.draw();
      return;
    }
    const [state, choices] = await Promise.all([
      this.client.getState(this.sessionId, true),
      this.client.getChoices(this.sessionId),
    ]);
    this.lastState = state;
    this.lastChoices = choices;
    this.draw();
  }

  private draw(): void {
    render(this.root, buildViewModel({
      sessionId: this.sessionId,
      state: this.lastState,
      choices: this.lastChoices,
      feed: this.feed,
      notice: this.notice,
    }));
  }

  private onClick(ev: Event): void {
    const target = (ev.target as HTMLElement | null)?.closest?.("[data-action]");
    if (!(target instanceof HTMLElement)) return;
    const action = this.actionOf(target.dataset);
    if (action !== null) void this.applyUserAction(action);
  }

  private actionOf(data: DOMStringMap): UserAction | null {
    switch (data.action) {
      case "step":
        if (data.kind === "local" && data.pid) {
          return { kind: "step", choice: { kind: "local", pid: data.pid } };
        }
        if (data.kind === "deliver" && data.from && data.to) {
          return { kind: "step", choice: { kind: "deliver", from: data.from, to: data.to } };
        }
        return null;
      case "rollback":
        if (data.pid && data.ckpt !== undefined) {
          return { kind: "rollback", pid: data.pid, checkpoint: Number(data.ckpt) };
        }
        return null;
      case "bstep":
        return data.pid ? { kind: "bstep", pid: data.pid } : null;
      case "drive":
        return { kind: "drive" };
      case "reset":
        return { kind: "reset" };
      default:
        return null;
    }
  }
}
