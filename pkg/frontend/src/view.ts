/**
 * Pure rendering of session payloads.
 *
 * `buildViewModel` folds the server's state, choices and the accumulated
 * event feed into one plain object; `render` rebuilds the DOM from it.
 * Nothing here computes steps, matches messages or guesses successor
 * states: every pixel traces back to a field the server sent.  A payload
 * that fails the schema check renders as a banner instead of a view.
 */

import type {
  BackwardChoice, Choices, ForwardChoice, GammaLane, HistEvent, MsgView,
  ProcessView, StateSnapshot, TraceEvent,
} from "./schema";
import { snapshotMismatch } from "./schema";

// ---------------------------------------------------------------------------
// View model
// ---------------------------------------------------------------------------

export interface PaneModel {
  pid: string;
  control: string;
  env: Record<string, string>;
  mailbox: MsgView[];
  markBadge: string | null;
  checkpoints: number[];
  historyDepth: number;
  failure: string | null;
  history: HistEvent[] | null;
  backRule: string | null;
}

export interface Notice {
  status: number;
  text: string;
}

export interface ViewModel {
  sessionId: string | null;
  mismatch: string | null;
  panes: PaneModel[];
  lanes: GammaLane[];
  forward: ForwardChoice[];
  canDrive: boolean;
  counters: { nextPid: number; nextId: number } | null;
  feed: TraceEvent[];
  notice: Notice | null;
}

export interface ViewInputs {
  sessionId: string | null;
  state: unknown;
  choices: Choices;
  feed: TraceEvent[];
  notice: Notice | null;
}

function markBadge(mark: string[] | null): string | null {
  if (mark === null) return null;
  return `Ψ {${mark.join(", ")}}`;
}

function paneOf(proc: ProcessView, backward: BackwardChoice[]): PaneModel {
  const back = backward.find((b) => b.pid === proc.pid);
  return {
    pid: proc.pid,
    control: proc.expr,
    env: proc.env,
    mailbox: proc.mailbox,
    markBadge: markBadge(proc.mark),
    checkpoints: proc.checkpoints,
    historyDepth: proc.history_len,
    failure: proc.failure,
    history: proc.history ?? null,
    backRule: back ? back.rule : null,
  };
}

export function buildViewModel(inputs: ViewInputs): ViewModel {
  const { sessionId, state, choices, feed, notice } = inputs;
  const mismatch = snapshotMismatch(state);
  if (mismatch !== null) {
    return {
      sessionId, mismatch, panes: [], lanes: [], forward: [],
      canDrive: false, counters: null, feed, notice,
    };
  }
  const snap = state as StateSnapshot;
  return {
    sessionId,
    mismatch: null,
    panes: snap.processes.map((p) => paneOf(p, choices.backward)),
    lanes: snap.gamma,
    forward: choices.forward,
    canDrive: choices.backward.length > 0,
    counters: { nextPid: snap.next_pid, nextId: snap.next_id },
    feed,
    notice,
  };
}

// ---------------------------------------------------------------------------
// HTML fragments
// ---------------------------------------------------------------------------

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function msgItem(msg: MsgView): string {
  return `<li class="rv-msg" data-msg-id="${msg.id}">${esc(msg.value)}` +
    ` <span class="rv-msg-id">#${msg.id}</span></li>`;
}

function queueList(messages: MsgView[], emptyText: string): string {
  if (messages.length === 0) return `<span class="rv-empty">${esc(emptyText)}</span>`;
  return `<ol class="rv-queue">${messages.map(msgItem).join("")}</ol>`;
}

export function histEventText(ev: HistEvent): string {
  switch (ev.kind) {
    case "ckpt": return `checkpoint #ch${ev.id}`;
    case "rec": return `receive mailbox[${ev.consumed}]`;
    case "send": return `send to ${ev.to} #${ev.id}`;
    case "spawn": return `spawn ${ev.child}`;
    case "deliver": return `deliver from ${ev.from} #${ev.id}`;
    default: return ev.kind;
  }
}

function historyList(history: HistEvent[]): string {
  if (history.length === 0) return `<span class="rv-empty">(no events)</span>`;
  const items = history.map((ev) => {
    const cls = ev.kind === "ckpt" ? "rv-ev rv-ev-ckpt" : "rv-ev";
    return `<li class="${cls}">${esc(histEventText(ev))}</li>`;
  });
  return `<ol class="rv-history">${items.join("")}</ol>`;
}

function envBlock(env: Record<string, string>): string {
  const names = Object.keys(env);
  if (names.length === 0) return "";
  const rows = names.map(
    (n) => `<div class="rv-bind"><dt>${esc(n)}</dt><dd>${esc(env[n])}</dd></div>`,
  );
  return `<dl class="rv-env">${rows.join("")}</dl>`;
}

function paneHtml(pane: PaneModel): string {
  const badges: string[] = [];
  if (pane.markBadge !== null) {
    badges.push(`<span class="rv-mark">${esc(pane.markBadge)}</span>`);
  }
  if (pane.failure !== null) {
    badges.push(`<span class="rv-failure">failed: ${esc(pane.failure)}</span>`);
  }
  const ckpts = pane.checkpoints.length === 0
    ? `<span class="rv-empty">(none)</span>`
    : pane.checkpoints.map((id) =>
        `<button class="rv-ckpt" data-action="rollback" data-pid="${esc(pane.pid)}"` +
        ` data-ckpt="${id}">roll back to #ch${id}</button>`,
      ).join("");
  const back = pane.backRule === null ? "" :
    `<button class="rv-bstep" data-action="bstep" data-pid="${esc(pane.pid)}">` +
    `undo (${esc(pane.backRule)})</button>`;
  const history = pane.history === null ? "" :
    `<div class="rv-row"><span class="rv-label">history, newest first</span>` +
    `${historyList(pane.history)}</div>`;
  return `<article class="rv-pane" data-pid="${esc(pane.pid)}">
    <header class="rv-pane-head">
      <span class="rv-pid">${esc(pane.pid)}</span>
      ${badges.join("\n      ")}
      <span class="rv-depth">history ${pane.historyDepth}</span>
    </header>
    <code class="rv-expr">${esc(pane.control)}</code>
    ${envBlock(pane.env)}
    <div class="rv-row"><span class="rv-label">mailbox</span>${queueList(pane.mailbox, "(empty)")}</div>
    <div class="rv-row"><span class="rv-label">checkpoints</span>${ckpts}</div>
    ${back}
    ${history}
  </article>`;
}

function laneHtml(lane: GammaLane): string {
  return `<div class="rv-lane" data-from="${esc(lane.from)}" data-to="${esc(lane.to)}">
    <span class="rv-lane-label">${esc(lane.from)} to ${esc(lane.to)}</span>
    ${queueList(lane.messages, "(empty)")}
  </div>`;
}

export function forwardChoiceText(choice: ForwardChoice): string {
  if (choice.kind === "local") return `step ${choice.pid}`;
  const preview = choice.preview
    ? `: ${choice.preview.value} (#${choice.preview.id})`
    : "";
  return `deliver ${choice.from} to ${choice.to}${preview}`;
}

function choiceButton(choice: ForwardChoice, index: number): string {
  const data = choice.kind === "local"
    ? `data-kind="local" data-pid="${esc(choice.pid)}"`
    : `data-kind="deliver" data-from="${esc(choice.from)}" data-to="${esc(choice.to)}"`;
  return `<button class="rv-choice" data-action="step" data-index="${index}" ${data}>` +
    `${esc(forwardChoiceText(choice))}</button>`;
}

export function feedEventText(ev: TraceEvent): string {
  if (ev.dir === "back") return `back ${ev.rule} ${ev.pid}`;
  const who = ev.pid ?? `${ev.from} to ${ev.to}`;
  const label = ev.label === undefined ? "" : ` ${JSON.stringify(ev.label)}`;
  return `${ev.step}. ${ev.rule} ${who}${label}`;
}

function feedHtml(feed: TraceEvent[]): string {
  if (feed.length === 0) return `<span class="rv-empty">(no events yet)</span>`;
  const items = feed.map((ev) => {
    const cls = ev.dir === "back" ? "rv-feed-ev rv-feed-back" : "rv-feed-ev";
    return `<li class="${cls}">${esc(feedEventText(ev))}</li>`;
  });
  items.reverse();
  return `<ol class="rv-feed-list">${items.join("")}</ol>`;
}

// ---------------------------------------------------------------------------
// Top-level render
// ---------------------------------------------------------------------------

export function render(root: HTMLElement, vm: ViewModel): void {
  const session = vm.sessionId === null
    ? `<span class="rv-empty">no session</span>`
    : `session <span class="rv-session-id">${esc(vm.sessionId)}</span>`;
  const notice = vm.notice === null ? "" :
    `<div class="rv-notice" data-status="${vm.notice.status}">${esc(vm.notice.text)}</div>`;

  if (vm.mismatch !== null) {
    root.innerHTML = `<div class="rv-top">${session}</div>
      ${notice}
      <div class="rv-banner">${esc(vm.mismatch)}</div>`;
    return;
  }

  const drive = vm.canDrive
    ? `<button class="rv-drive" data-action="drive">drive rollback</button>`
    : "";
  const forward = vm.forward.length === 0
    ? `<span class="rv-empty">(no forward choices)</span>`
    : vm.forward.map(choiceButton).join("");
  const counters = vm.counters === null ? "" :
    `<div class="rv-counters">next pid ${vm.counters.nextPid}, next id ${vm.counters.nextId}</div>`;

  root.innerHTML = `<div class="rv-top">${session}
      <button class="rv-reset" data-action="reset">reset</button>
    </div>
    ${notice}
    <section class="rv-processes">${vm.panes.map(paneHtml).join("\n")}</section>
    <section class="rv-gamma">
      <span class="rv-label">in transit</span>
      ${vm.lanes.length === 0 ? `<span class="rv-empty">(no messages in transit)</span>` : vm.lanes.map(laneHtml).join("\n")}
    </section>
    <section class="rv-choices">
      <span class="rv-label">choices</span>
      ${forward}
      ${drive}
    </section>
    ${counters}
    <section class="rv-events">
      <span class="rv-label">event feed, newest first</span>
      ${feedHtml(vm.feed)}
    </section>`;
}

// ---------------------------------------------------------------------------
// Styles
// ---------------------------------------------------------------------------

export const CSS = `
body { background: #11131a; color: #d6d6d6; font: 13px/1.5 "DejaVu Sans Mono", monospace; margin: 16px; }
.rv-top { margin-bottom: 8px; color: #8a8fa3; }
.rv-session-id { color: #d6d6d6; }
.rv-banner { background: #5a1e1e; border: 1px solid #a33; color: #ffd7d7; padding: 10px 14px; }
.rv-notice { background: #4a3a14; border: 1px solid #a80; color: #ffe9b0; padding: 6px 10px; margin: 6px 0; }
.rv-processes { display: flex; gap: 12px; flex-wrap: wrap; align-items: flex-start; }
.rv-pane { background: #191c26; border: 1px solid #2d3142; padding: 10px 12px; min-width: 260px; }
.rv-pane-head { display: flex; gap: 10px; align-items: baseline; margin-bottom: 6px; }
.rv-pid { color: #7fd1b9; font-weight: bold; }
.rv-mark { background: #512d6d; border: 1px solid #9a6bd1; color: #e8d5ff; padding: 0 6px; }
.rv-failure { background: #5a1e1e; color: #ffb4b4; padding: 0 6px; }
.rv-depth { color: #596078; margin-left: auto; }
.rv-expr { display: block; background: #10121a; color: #c9d7a0; padding: 6px 8px; margin: 4px 0; white-space: pre-wrap; }
.rv-env { margin: 4px 0; }
.rv-bind { display: flex; gap: 6px; }
.rv-bind dt { color: #8a8fa3; }
.rv-bind dt::after { content: " ="; }
.rv-bind dd { margin: 0; }
.rv-row { margin: 4px 0; }
.rv-label { color: #596078; text-transform: uppercase; font-size: 10px; letter-spacing: 1px; display: block; }
.rv-queue, .rv-history, .rv-feed-list { margin: 2px 0; padding-left: 20px; }
.rv-msg-id { color: #596078; }
.rv-empty { color: #454b61; }
.rv-ev-ckpt { color: #e8d5ff; background: #2d1f3d; }
.rv-feed-back { color: #9a6bd1; }
.rv-lane { margin: 4px 0; }
.rv-lane-label { color: #7fa7d1; }
button { background: #222636; border: 1px solid #3b415a; color: #d6d6d6; font: inherit; padding: 2px 10px; margin: 2px 4px 2px 0; cursor: pointer; }
button:hover { background: #2c3147; }
.rv-ckpt { border-color: #9a6bd1; }
.rv-drive { border-color: #d1a86b; }
.rv-counters { color: #596078; margin: 8px 0; }
`;

export function injectStyles(doc: Document): void {
  const style = doc.createElement("style");
  style.textContent = CSS;
  doc.head.appendChild(style);
}
