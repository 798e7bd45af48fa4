/**
 * Controller tests against a scripted in-memory service.
 *
 * The stub answers the five endpoints from fixture payloads and logs
 * every request, which pins the controller's contract: actions issue
 * exactly one call, nothing renders before the server answers, errors
 * become inline notices, and the only state that survives a reset is
 * what the next server payload says.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { DebugClient, type FetchFn } from "../src/api";
import { App } from "../src/app";
import type { TraceEvent } from "../src/schema";

import feedFixture from "./fixtures/feed.json";
import initialChoices from "./fixtures/initial_choices.json";
import initialState from "./fixtures/initial_state.json";
import midrunChoices from "./fixtures/midrun_choices.json";
import midrunState from "./fixtures/midrun_state.json";

const STEP_EVENT = feedFixture[0] as TraceEvent;

class Gate {
  promise: Promise<void>;
  open!: () => void;

  constructor() {
    this.promise = new Promise((resolve) => { this.open = resolve; });
  }
}

/** Minimal scripted stand-in for the debug service. */
class StubService {
  requests: string[] = [];
  bodies: unknown[] = [];
  state: unknown = initialState;
  choices: unknown = initialChoices;
  afterStep: { state: unknown; choices: unknown } | null = null;
  stepStatus: { status: number; detail: string } | null = null;
  stepError: Error | null = null;
  stepGates: Gate[] = [];
  private ids = ["s1", "s2", "s3"];

  fetch: FetchFn = async (input, init) => {
    const method = init?.method ?? "GET";
    const path = input.replace(/^http:\/\/[^/]+/, "").replace(/\?.*$/, "");
    this.requests.push(`${method} ${path}`);
    if (init?.body) this.bodies.push(JSON.parse(init.body as string));

    if (method === "POST" && path === "/v1/sessions") {
      return reply(201, { id: this.ids.shift(), state: this.state });
    }
    if (method === "DELETE") return reply(204, null);
    if (method === "GET" && path.endsWith("/state")) return reply(200, this.state);
    if (method === "GET" && path.endsWith("/choices")) return reply(200, this.choices);
    if (method === "POST" && path.endsWith("/step")) {
      const gate = this.stepGates.shift();
      if (gate) await gate.promise;
      if (this.stepError) throw this.stepError;
      if (this.stepStatus) {
        return reply(this.stepStatus.status, { detail: this.stepStatus.detail });
      }
      if (this.afterStep) {
        this.state = this.afterStep.state;
        this.choices = this.afterStep.choices;
      }
      return reply(200, { state: this.state, event: STEP_EVENT });
    }
    return reply(404, { detail: `no route ${method} ${path}` });
  };
}

function reply(status: number, data: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: async () => data,
  } as unknown as Response;
}

async function microtasks(rounds = 10): Promise<void> {
  for (let i = 0; i < rounds; i += 1) await Promise.resolve();
}

let stub: StubService;
let root: HTMLElement;
let app: App;

beforeEach(async () => {
  stub = new StubService();
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app") as HTMLElement;
  app = new App({
    root,
    client: new DebugClient("http://stub", stub.fetch),
    source: "module stub = main/0 = fun () -> ok",
  });
  await app.start();
});

describe("session start", () => {
  it("creates the session and renders the first authoritative state", () => {
    expect(stub.requests[0]).toBe("POST /v1/sessions");
    expect(stub.bodies[0]).toEqual({
      source: "module stub = main/0 = fun () -> ok",
      entry: "main/0",
    });
    expect(root.querySelector(".rv-session-id")?.textContent).toBe("s1");
    expect(root.querySelectorAll(".rv-pane")).toHaveLength(1);
    expect(root.querySelector(".rv-events")?.textContent).toContain("(no events yet)");
  });
});

describe("choose-step", () => {
  it("posts the clicked choice and renders the refetched state", async () => {
    stub.afterStep = { state: midrunState, choices: midrunChoices };
    (root.querySelector('.rv-choice[data-pid="p0"]') as HTMLElement).click();
    await app.whenIdle();

    expect(stub.requests).toContain("POST /v1/sessions/s1/step");
    expect(stub.bodies).toContainEqual({ choice: { kind: "local", pid: "p0" } });
    expect(root.querySelectorAll(".rv-pane")).toHaveLength(3);
    expect(root.querySelectorAll(".rv-feed-ev")).toHaveLength(1);
    expect(app.feed).toEqual([STEP_EVENT]);
  });

  it("sends deliver choices with both endpoints", async () => {
    stub.state = midrunState;
    stub.choices = midrunChoices;
    await app.applyUserAction({ kind: "reset" });
    (root.querySelector('.rv-choice[data-kind="deliver"][data-to="p2"]') as HTMLElement).click();
    await app.whenIdle();
    expect(stub.bodies).toContainEqual({
      choice: { kind: "deliver", from: "p0", to: "p2" },
    });
  });
});

describe("error handling", () => {
  it("surfaces a 409 as an inline notice and keeps the session", async () => {
    stub.stepStatus = { status: 409, detail: "choice not enabled: Local(p0)" };
    (root.querySelector(".rv-choice") as HTMLElement).click();
    await app.whenIdle();

    const notice = root.querySelector(".rv-notice") as HTMLElement;
    expect(notice.dataset.status).toBe("409");
    expect(notice.textContent).toBe("choice not enabled: Local(p0)");
    expect(root.querySelector(".rv-session-id")?.textContent).toBe("s1");
    expect(root.querySelectorAll(".rv-pane")).toHaveLength(1);
    expect(app.feed).toEqual([]);
  });

  it("clears the notice on the next successful action", async () => {
    stub.stepStatus = { status: 422, detail: "not a pid: 'zz'" };
    (root.querySelector(".rv-choice") as HTMLElement).click();
    await app.whenIdle();
    expect(root.querySelector(".rv-notice")).not.toBeNull();

    stub.stepStatus = null;
    (root.querySelector(".rv-choice") as HTMLElement).click();
    await app.whenIdle();
    expect(root.querySelector(".rv-notice")).toBeNull();
    expect(app.feed).toHaveLength(1);
  });

  it("reports unreachable servers without losing the last view", async () => {
    stub.stepError = new Error("connection refused");
    (root.querySelector(".rv-choice") as HTMLElement).click();
    await app.whenIdle();

    const notice = root.querySelector(".rv-notice") as HTMLElement;
    expect(notice.dataset.status).toBe("0");
    expect(notice.textContent).toContain("connection refused");
    expect(root.querySelectorAll(".rv-pane")).toHaveLength(1);
  });
});

describe("reset", () => {
  it("deletes the session, opens a fresh one and clears the feed", async () => {
    stub.afterStep = { state: midrunState, choices: midrunChoices };
    (root.querySelector(".rv-choice") as HTMLElement).click();
    await app.whenIdle();
    expect(app.feed).toHaveLength(1);

    (root.querySelector(".rv-reset") as HTMLElement).click();
    await app.whenIdle();

    expect(stub.requests).toContain("DELETE /v1/sessions/s1");
    expect(root.querySelector(".rv-session-id")?.textContent).toBe("s2");
    expect(app.feed).toEqual([]);
    expect(root.querySelector(".rv-events")?.textContent).toContain("(no events yet)");
  });
});

describe("no optimistic rendering", () => {
  it("leaves the view untouched until the server answers", async () => {
    const gate = new Gate();
    stub.stepGates.push(gate);
    stub.afterStep = { state: midrunState, choices: midrunChoices };
    const before = root.innerHTML;

    const pending = app.applyUserAction({
      kind: "step", choice: { kind: "local", pid: "p0" },
    });
    await microtasks();
    expect(root.innerHTML).toBe(before);

    gate.open();
    await pending;
    expect(root.innerHTML).not.toBe(before);
    expect(root.querySelectorAll(".rv-pane")).toHaveLength(3);
  });

  it("serializes queued actions strictly one at a time", async () => {
    const gate = new Gate();
    stub.stepGates.push(gate);
    const act = { kind: "step" as const, choice: { kind: "local" as const, pid: "p0" } };

    void app.applyUserAction(act);
    const second = app.applyUserAction(act);
    await microtasks();
    expect(stub.requests.filter((r) => r.endsWith("/step"))).toHaveLength(1);

    gate.open();
    await second;
    expect(stub.requests.filter((r) => r.endsWith("/step"))).toHaveLength(2);
    const refetches = stub.requests.filter((r) => r.startsWith("GET"));
    expect(refetches.length).toBeGreaterThanOrEqual(6);
  });
});
