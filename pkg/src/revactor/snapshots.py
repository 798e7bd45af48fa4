"""JSON views of systems, trace events, choices and scripts.

Snapshots are for inspection and the debug protocol: process controls
and values are rendered as source-syntax strings, histories as compact
event summaries.  Canonical byte-exact state encodings live in the
canon module; this one favours readability.

Choices serialize to small dicts so schedules can be written to disk
and replayed; `script_from_json` restores them.
"""

from __future__ import annotations

import json
import re
from typing import Optional, Union

from .reversible import (
    CheckEv, CheckpointEv, DeliverEv, RecEv, RProcess, RSystem, SelfEv,
    SendEv, SpawnEv, TauEv, checkpoints_of, hist_iter, hist_len,
)
from .syntax import Pid, pretty_expr
from .systems import Deliver, Local, Msg, Process, StepChoice, System

AnySystem = Union[System, RSystem]
AnyProcess = Union[Process, RProcess]


def pid_str(pid: Pid) -> str:
    return str(pid)


def parse_pid(text: str) -> Pid:
    m = re.fullmatch(r"p(\d+)", text)
    if m is None:
        raise ValueError(f"not a pid: {text!r}")
    return Pid(int(m.group(1)))


def _msg_json(m: Msg) -> dict:
    return {"id": m.id, "value": pretty_expr(m.value)}


def _mark_json(proc: AnyProcess) -> Optional[list[str]]:
    mark = getattr(proc, "mark", None)
    if mark is None:
        return None
    return sorted(str(c) for c in mark)


def _hist_json(proc: AnyProcess) -> list[dict]:
    out = []
    for ev in hist_iter(getattr(proc, "hist", None)):
        if isinstance(ev, TauEv):
            out.append({"kind": "tau"})
        elif isinstance(ev, SelfEv):
            out.append({"kind": "self"})
        elif isinstance(ev, CheckEv):
            out.append({"kind": "check"})
        elif isinstance(ev, CheckpointEv):
            out.append({"kind": "ckpt", "id": ev.id})
        elif isinstance(ev, RecEv):
            out.append({"kind": "rec", "consumed": ev.consumed})
        elif isinstance(ev, SendEv):
            out.append({"kind": "send", "to": pid_str(ev.dest), "id": ev.id})
        elif isinstance(ev, SpawnEv):
            out.append({"kind": "spawn", "child": pid_str(ev.child)})
        elif isinstance(ev, DeliverEv):
            out.append({"kind": "deliver", "from": pid_str(ev.sender), "id": ev.msg.id})
    return out


def state_snapshot(sys_: AnySystem, include_history: bool = False) -> dict:
    """Readable whole-system snapshot (schema version v1)."""
    procs = []
    for pid in sorted(sys_.pool, key=lambda p: p.index):
        proc = sys_.pool[pid]
        entry = {
            "pid": pid_str(pid),
            "env": {k: pretty_expr(v) for k, v in sorted(proc.env.items())},
            "expr": pretty_expr(proc.expr),
            "mailbox": [_msg_json(m) for m in proc.mailbox],
            "history_len": hist_len(getattr(proc, "hist", None)),
            "checkpoints": checkpoints_of(proc) if isinstance(proc, RProcess) else [],
            "mark": _mark_json(proc),
            "failure": proc.failure,
        }
        if include_history:
            entry["history"] = _hist_json(proc)
        procs.append(entry)
    gamma = []
    for key in sorted(sys_.gamma, key=lambda k: (k[0].index, k[1].index)):
        snd, rcv = key
        gamma.append({
            "from": pid_str(snd),
            "to": pid_str(rcv),
            "messages": [_msg_json(m) for m in sys_.gamma[key]],
        })
    return {
        "version": "v1",
        "processes": procs,
        "gamma": gamma,
        "next_pid": sys_.next_pid,
        "next_id": sys_.next_id,
    }


# ---------------------------------------------------------------------------
# Choices and scripts
# ---------------------------------------------------------------------------


def choice_to_json(choice: StepChoice) -> dict:
    if isinstance(choice, Local):
        return {"kind": "local", "pid": pid_str(choice.pid)}
    return {"kind": "deliver", "from": pid_str(choice.sender), "to": pid_str(choice.receiver)}


def choice_from_json(data: dict) -> StepChoice:
    kind = data.get("kind")
    if kind == "local":
        return Local(parse_pid(data["pid"]))
    if kind == "deliver":
        return Deliver(parse_pid(data["from"]), parse_pid(data["to"]))
    raise ValueError(f"unknown choice kind {kind!r}")


def script_to_json(choices: list[StepChoice]) -> str:
    return json.dumps([choice_to_json(c) for c in choices], indent=0)


def script_from_json(text: str) -> list[StepChoice]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("a script is a JSON list of choices")
    return [choice_from_json(c) for c in data]


# ---------------------------------------------------------------------------
# Trace events
# ---------------------------------------------------------------------------


def forward_trace_event(
    step: int, before: AnySystem, after: AnySystem, choice: StepChoice, rule: str
) -> dict:
    """One NDJSON trace line for a forward step."""
    event: dict = {"step": step, "rule": rule}
    if isinstance(choice, Deliver):
        msg = after.pool[choice.receiver].mailbox[-1]
        event.update({
            "from": pid_str(choice.sender),
            "to": pid_str(choice.receiver),
            "label": _msg_json(msg),
        })
        return event
    pid = choice.pid
    event["pid"] = pid_str(pid)
    proc = after.pool[pid]
    if rule == "Fail":
        event["label"] = {"failure": proc.failure}
        return event
    hist = getattr(proc, "hist", None)
    if hist is not None:
        top = hist[0]
        if isinstance(top, SendEv):
            msg = after.gamma[(pid, top.dest)][-1]
            event["label"] = {"to": pid_str(top.dest), "id": top.id,
                              "value": pretty_expr(msg.value)}
        elif isinstance(top, RecEv):
            event["label"] = {"consumed": top.consumed}
        elif isinstance(top, SpawnEv):
            event["label"] = {"child": pid_str(top.child)}
        elif isinstance(top, CheckEv):
            event["label"] = {"id": before.next_id}
    return event


def backward_trace_event(step: int, pid: Pid, rule: str) -> dict:
    return {"step": step, "dir": "back", "rule": rule, "pid": pid_str(pid)}
