"""Canonical forms for whole-system states.

Pids and unique ids are allocation-order artifacts: two runs that differ
only in when they drew fresh identifiers should count as the same state.
Canonicalization renames both by first occurrence along a fixed
traversal (processes in pid order: control, mailbox, mark; then the
global mailbox; then, optionally, the histories) and flattens the state
into nested tuples of primitives, suitable for hashing and for stable
byte-exact snapshots.

Two granularities:

* include_history=True keeps message tags, histories and marks; this
  distinguishes states of the instrumented semantics that differ only
  in their recorded past.
* include_history=False strips tags, histories and marks, yielding the
  canonical form of the observable state.  States of the plain and the
  instrumented semantics can be compared at this level.

Fresh-identifier counters are never part of the canonical form.
"""

from __future__ import annotations

import hashlib
from typing import Optional, Union

from .reversible import (
    CheckEv, CheckpointEv, Checkpoint, DeliverEv, RecEv, RSystem, SendEv,
    SpawnEv, SelfEv, TauEv, hist_iter,
)
from .syntax import (
    Apply, Call, Case, CheckCall, Clause, Cons, Expr, FName, Hole, Let, Lit,
    NilType, Pid, Receive, SelfCall, Send, Spawn, Tup, Uid, Var, is_anonymous,
)
from .systems import Msg, System

AnySystem = Union[System, RSystem]


class _Renamer:
    def __init__(self) -> None:
        self.pids: dict[int, int] = {}
        self.uids: dict[int, int] = {}

    def pid(self, p: Pid) -> int:
        return self.pids.setdefault(p.index, len(self.pids))

    def uid(self, n: int) -> int:
        return self.uids.setdefault(n, len(self.uids))


def canonicalize(sys_: AnySystem, include_history: bool = True) -> tuple:
    ren = _Renamer()
    pids = sorted(sys_.pool, key=lambda p: p.index)

    procs = []
    for pid in pids:
        proc = sys_.pool[pid]
        entry = (
            "proc",
            ren.pid(pid),
            _env(ren, proc.env),
            _expr(ren, proc.expr),
            tuple(_msg(ren, m, include_history) for m in proc.mailbox),
            proc.failure,
            _mark(ren, getattr(proc, "mark", None)) if include_history else None,
        )
        procs.append(entry)

    gamma = []
    for key in sorted(sys_.gamma, key=lambda k: (k[0].index, k[1].index)):
        snd, rcv = key
        msgs = tuple(_msg(ren, m, include_history) for m in sys_.gamma[key])
        gamma.append((ren.pid(snd), ren.pid(rcv), msgs))

    if not include_history:
        return ("system", tuple(procs), tuple(gamma))

    hists = []
    for pid in pids:
        proc = sys_.pool[pid]
        events = tuple(_event(ren, ev) for ev in hist_iter(getattr(proc, "hist", None)))
        hists.append((ren.pids[pid.index], events))
    return ("system", tuple(procs), tuple(gamma), tuple(hists))


def digest(sys_: AnySystem, include_history: bool = True) -> str:
    return hashlib.sha256(canonical_bytes(sys_, include_history)).hexdigest()


def canonical_bytes(sys_: AnySystem, include_history: bool = True) -> bytes:
    return repr(canonicalize(sys_, include_history)).encode()


# ---------------------------------------------------------------------------
# Component encoders
# ---------------------------------------------------------------------------


def _env(ren: _Renamer, env: dict) -> tuple:
    return tuple((name, _expr(ren, env[name])) for name in sorted(env))


def _msg(ren: _Renamer, m: Msg, tagged: bool) -> tuple:
    if tagged:
        return ("msg", ren.uid(m.id), _expr(ren, m.value))
    return _expr(ren, m.value)


def _mark(ren: _Renamer, mark: Optional[frozenset]) -> Optional[tuple]:
    if mark is None:
        return None
    entries = []
    for c in sorted(mark, key=lambda c: (c.kind, c.id)):
        if c.kind == "sp":
            entries.append((c.kind, ren.pid(Pid(c.id))))
        else:
            entries.append((c.kind, ren.uid(c.id)))
    return tuple(entries)


def _event(ren: _Renamer, ev) -> tuple:
    if isinstance(ev, TauEv):
        return ("tau", _env(ren, ev.env), _expr(ren, ev.expr))
    if isinstance(ev, SelfEv):
        return ("self", _env(ren, ev.env), _expr(ren, ev.expr))
    if isinstance(ev, CheckEv):
        return ("check", _env(ren, ev.env), _expr(ren, ev.expr))
    if isinstance(ev, CheckpointEv):
        return ("ckpt", ren.uid(ev.id))
    if isinstance(ev, RecEv):
        return (
            "rec", _env(ren, ev.env), _expr(ren, ev.expr),
            tuple(_msg(ren, m, True) for m in ev.mailbox), ren.uid(ev.consumed),
        )
    if isinstance(ev, SendEv):
        return ("send", ren.pid(ev.dest), _env(ren, ev.env),
                _expr(ren, ev.expr), ren.uid(ev.id))
    if isinstance(ev, SpawnEv):
        return ("spawn", _env(ren, ev.env), _expr(ren, ev.expr), ren.pid(ev.child))
    if isinstance(ev, DeliverEv):
        return ("deliver", ren.pid(ev.sender), ren.pid(ev.receiver),
                _msg(ren, ev.msg, True))
    raise TypeError(f"cannot canonicalize event {type(ev).__name__}")


def _expr(ren: _Renamer, e: Expr) -> tuple:
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, NilType):
            return ("lit", "nil")
        kind = {int: "int", float: "float", str: "atom"}[type(v)]
        return ("lit", kind, v)
    if isinstance(e, Pid):
        return ("pid", ren.pid(e))
    if isinstance(e, Uid):
        return ("uid", ren.uid(e.index))
    if isinstance(e, Var):
        # Anonymous binders carry parser-invented names (`_@k`); the
        # numbering depends on where parsing started, so it is erased
        # here the same way pids and uids are renamed.
        return ("var", "_" if is_anonymous(e.name) else e.name)
    if isinstance(e, FName):
        return ("fname", e.name, e.arity)
    if isinstance(e, Hole):
        return ("hole",)
    if isinstance(e, Cons):
        return ("cons", _expr(ren, e.head), _expr(ren, e.tail))
    if isinstance(e, Tup):
        return ("tup", tuple(_expr(ren, x) for x in e.elems))
    if isinstance(e, Call):
        return ("call", e.op, tuple(_expr(ren, x) for x in e.args))
    if isinstance(e, Apply):
        return ("apply", e.fname.name, e.fname.arity,
                tuple(_expr(ren, x) for x in e.args))
    if isinstance(e, Spawn):
        return ("spawnexpr", e.fname.name, e.fname.arity,
                tuple(_expr(ren, x) for x in e.args))
    if isinstance(e, Send):
        return ("sendexpr", _expr(ren, e.dest), _expr(ren, e.payload))
    if isinstance(e, Let):
        var = "_" if is_anonymous(e.var) else e.var
        return ("let", var, _expr(ren, e.bound), _expr(ren, e.body))
    if isinstance(e, Case):
        return ("case", _expr(ren, e.scrutinee),
                tuple(_clause(ren, c) for c in e.clauses))
    if isinstance(e, Receive):
        return ("receive", tuple(_clause(ren, c) for c in e.clauses))
    if isinstance(e, SelfCall):
        return ("selfcall",)
    if isinstance(e, CheckCall):
        return ("checkcall",)
    raise TypeError(f"cannot canonicalize {type(e).__name__}")


def _clause(ren: _Renamer, c: Clause) -> tuple:
    return ("clause", _expr(ren, c.pattern), _expr(ren, c.guard), _expr(ren, c.body))
