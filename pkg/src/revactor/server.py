"""HTTP debug service: sessions over the stepping operations.

Versioned under /v1.  A session wraps a parsed program and a live
system; all mutating routes serialize through a per-session lock.  The
payloads mirror the snapshot schema, with choices and backward rules
exposed so a client never needs semantics of its own:

    POST   /v1/sessions              {source, entry} -> {id, state}
    GET    /v1/sessions              -> {sessions: [id, ...]}
    GET    /v1/sessions/{id}/state   ?history=1 for event summaries
    GET    /v1/sessions/{id}/choices -> {forward: [...], backward: [...]}
    POST   /v1/sessions/{id}/step    {choice} -> {state, event}
    POST   /v1/sessions/{id}/bstep   {pid} -> {state, event}
    POST   /v1/sessions/{id}/rollback {pid, checkpoint} -> {state} (marks only)
    POST   /v1/sessions/{id}/drive   -> {state, events}
    DELETE /v1/sessions/{id}         -> 204

Errors: 404 unknown session, 409 choice not enabled / process not
marked, 422 malformed body or program, 500 stuck rollback (with a
diagnostic).  With a persist directory, every session action is
journaled and sessions are replayed from the journal on demand, which
is sound because execution is deterministic given the action sequence.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .explore import forward_rule_name
from .reversible import (
    RSystem, enabled_forward, fstep, initial_rsystem, marked_pids,
)
from .rollback import StuckRollback, bstep, peek_backward_rule, request_rollback, rollback_drive
from .snapshots import (
    backward_trace_event, choice_from_json, choice_to_json,
    forward_trace_event, parse_pid, pid_str, state_snapshot,
)
from .syntax import FName, Module, ParseError, parse_module, pretty_expr
from .systems import ChoiceNotEnabled, Deliver, SemanticsError


class CreateSession(BaseModel):
    source: str
    entry: str = "main/0"


class StepBody(BaseModel):
    choice: dict


class BstepBody(BaseModel):
    pid: str


class RollbackBody(BaseModel):
    pid: str
    checkpoint: int


@dataclass
class Session:
    id: str
    source: str
    entry: FName
    mod: Module
    system: RSystem
    step_count: int = 0
    actions: list[dict] = field(default_factory=list)
    undo_stack: list[RSystem] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _parse_entry(text: str) -> FName:
    name, _, arity = text.partition("/")
    if not name or not arity.isdigit():
        raise HTTPException(422, detail=f"entry must be atom/arity, got {text!r}")
    return FName(name, int(arity))


def create_app(persist_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="revactor debug service", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}
    persist = Path(persist_dir) if persist_dir else None
    if persist is not None:
        persist.mkdir(parents=True, exist_ok=True)

    def save(ses: Session) -> None:
        if persist is None:
            return
        payload = {"source": ses.source, "entry": str(ses.entry), "actions": ses.actions}
        (persist / f"{ses.id}.json").write_text(json.dumps(payload))

    def restore(sid: str) -> Optional[Session]:
        if persist is None:
            return None
        path = persist / f"{sid}.json"
        if not path.exists():
            return None
        data = json.loads(path.read_text())
        ses = _new_session(sid, data["source"], _parse_entry(data["entry"]))
        for action in data["actions"]:
            _apply_action(ses, action)
        sessions[sid] = ses
        return ses

    def _new_session(sid: str, source: str, entry: FName) -> Session:
        try:
            mod = parse_module(source)
        except ParseError as err:
            raise HTTPException(422, detail=str(err))
        if mod.fun(entry) is None or entry.arity != 0:
            raise HTTPException(422, detail=f"entry {entry} is not a nullary function")
        return Session(id=sid, source=source, entry=entry, mod=mod,
                       system=initial_rsystem(mod, entry))

    def _apply_action(ses: Session, action: dict) -> dict:
        """Execute one journaled action against the live system."""
        kind = action["kind"]
        ses.undo_stack.append(ses.system)
        if kind == "step":
            choice = choice_from_json(action["choice"])
            before = ses.system
            ses.system = fstep(ses.mod, before, choice)
            rule = forward_rule_name(before, ses.system, choice)
            event = forward_trace_event(ses.step_count, before, ses.system, choice, rule)
            ses.step_count += 1
            return {"event": event}
        if kind == "bstep":
            pid = parse_pid(action["pid"])
            proc = ses.system.pool.get(pid)
            if proc is None or proc.mark is None:
                ses.undo_stack.pop()
                raise HTTPException(409, detail=f"{action['pid']} is not marked for rollback")
            ses.system, rule = bstep(ses.mod, ses.system, pid)
            return {"event": backward_trace_event(ses.step_count, pid, rule)}
        if kind == "rollback":
            # Marks the process; the client follows up with /drive (all
            # the way home) or /bstep (one backward rule at a time).
            pid = parse_pid(action["pid"])
            if pid not in ses.system.pool:
                ses.undo_stack.pop()
                raise HTTPException(404, detail=f"no process {action['pid']}")
            ses.system = request_rollback(ses.system, pid, action["checkpoint"])
            return {"events": []}
        if kind == "drive":
            ses.system, applied = rollback_drive(ses.mod, ses.system)
            events = [backward_trace_event(ses.step_count, p, r) for p, r in applied]
            return {"events": events}
        raise HTTPException(422, detail=f"unknown action kind {kind!r}")

    def get_session(sid: str) -> Session:
        ses = sessions.get(sid) or restore(sid)
        if ses is None:
            raise HTTPException(404, detail=f"no session {sid}")
        return ses

    def run_action(sid: str, action: dict) -> dict:
        ses = get_session(sid)
        with ses.lock:
            try:
                result = _apply_action(ses, action)
            except ChoiceNotEnabled as err:
                ses.undo_stack.pop()
                raise HTTPException(409, detail=str(err))
            except (ValueError, SemanticsError) as err:
                ses.undo_stack.pop()
                raise HTTPException(422, detail=str(err))
            except StuckRollback as err:
                ses.undo_stack.pop()
                raise HTTPException(500, detail=f"stuck rollback: {err}")
            ses.actions.append(action)
            save(ses)
            result["state"] = state_snapshot(ses.system)
            return result

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSession):
        sid = uuid.uuid4().hex[:12]
        ses = _new_session(sid, body.source, _parse_entry(body.entry))
        sessions[sid] = ses
        save(ses)
        return {"id": sid, "state": state_snapshot(ses.system)}

    @app.get("/v1/sessions")
    def list_sessions():
        return {"sessions": sorted(sessions)}

    @app.get("/v1/sessions/{sid}/state")
    def get_state(sid: str, history: bool = False):
        ses = get_session(sid)
        with ses.lock:
            return state_snapshot(ses.system, include_history=history)

    @app.get("/v1/sessions/{sid}/choices")
    def get_choices(sid: str):
        ses = get_session(sid)
        with ses.lock:
            forward = []
            for choice in enabled_forward(ses.mod, ses.system):
                entry = choice_to_json(choice)
                if isinstance(choice, Deliver):
                    msg = ses.system.gamma[(choice.sender, choice.receiver)][0]
                    entry["preview"] = {"id": msg.id, "value": pretty_expr(msg.value)}
                forward.append(entry)
            backward = [
                {"pid": pid_str(pid), "rule": peek_backward_rule(ses.mod, ses.system, pid)}
                for pid in marked_pids(ses.system)
            ]
            return {"forward": forward, "backward": backward}

    @app.post("/v1/sessions/{sid}/step")
    def post_step(sid: str, body: StepBody):
        return run_action(sid, {"kind": "step", "choice": body.choice})

    @app.post("/v1/sessions/{sid}/bstep")
    def post_bstep(sid: str, body: BstepBody):
        return run_action(sid, {"kind": "bstep", "pid": body.pid})

    @app.post("/v1/sessions/{sid}/rollback")
    def post_rollback(sid: str, body: RollbackBody):
        return run_action(sid, {"kind": "rollback", "pid": body.pid,
                                "checkpoint": body.checkpoint})

    @app.post("/v1/sessions/{sid}/drive")
    def post_drive(sid: str):
        return run_action(sid, {"kind": "drive"})

    @app.delete("/v1/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        if sid not in sessions and (persist is None or not (persist / f"{sid}.json").exists()):
            raise HTTPException(404, detail=f"no session {sid}")
        sessions.pop(sid, None)
        if persist is not None:
            (persist / f"{sid}.json").unlink(missing_ok=True)
        return Response(status_code=204)

    return app
