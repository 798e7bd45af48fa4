"""Forward semantics instrumented with per-process histories.

This is a Landauer embedding of the standard semantics: each process
carries a history stack (newest first) recording, for every step, just
enough of the pre-step state to undo it.

* Tau, self: the prior control (environment, expression).
* Check: the prior control, plus a checkpoint marker entry carrying the
  fresh unique id handed to the program.  Checkpoint markers are what
  rollback later rewinds to.
* Receive: the prior control and the full prior local mailbox, plus the
  id of the consumed message.
* Send: the prior control, the destination, and the unique id minted
  for the outgoing message.
* Spawn: the prior control and the child pid.
* Deliver: the (sender, receiver) pair and the exact message appended
  to the local mailbox.

Histories are stored as immutable cons chains `(event, rest)` so
pushing and popping are O(1) and snapshots share structure.

Processes additionally carry an optional rollback mark: a set of
pending undo obligations.  The forward semantics never steps a marked
process; driving marked processes backwards is the job of the rollback
module.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional, Union

from .exprstep import (
    CheckL, Finished, RecL, RunError, SelfL, SendL, SpawnL, TauL, step_expr,
    subst_hole,
)
from .syntax import Apply, Env, Expr, FName, Module, Pid, Uid, Value, subst_extend
from .systems import (
    ChoiceNotEnabled, Deliver, Gamma, GammaKey, Local, Msg, Process,
    SemanticsError, StepChoice, System, gamma_append, gamma_pop_oldest,
    matchrec,
)

# ---------------------------------------------------------------------------
# History events and checkpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TauEv:
    env: Env
    expr: Expr


@dataclass(frozen=True)
class SelfEv:
    env: Env
    expr: Expr


@dataclass(frozen=True)
class CheckEv:
    env: Env
    expr: Expr


@dataclass(frozen=True)
class CheckpointEv:
    """Marker entry pushed beneath a CheckEv; names the checkpoint id."""

    id: int


@dataclass(frozen=True)
class RecEv:
    env: Env
    expr: Expr
    mailbox: tuple[Msg, ...]
    consumed: int


@dataclass(frozen=True)
class SendEv:
    dest: Pid
    env: Env
    expr: Expr
    id: int


@dataclass(frozen=True)
class SpawnEv:
    env: Env
    expr: Expr
    child: Pid


@dataclass(frozen=True)
class DeliverEv:
    sender: Pid
    receiver: Pid
    msg: Msg


HistEvent = Union[TauEv, SelfEv, CheckEv, CheckpointEv, RecEv, SendEv, SpawnEv, DeliverEv]

# Cons-chain history: None is empty, otherwise (newest event, rest).
Hist = Optional[tuple]


def hist_push(hist: Hist, ev: HistEvent) -> Hist:
    return (ev, hist)


def hist_iter(hist: Hist) -> Iterator[HistEvent]:
    while hist is not None:
        yield hist[0]
        hist = hist[1]


def hist_len(hist: Hist) -> int:
    n = 0
    while hist is not None:
        n += 1
        hist = hist[1]
    return n


# Pending undo obligations attached to a marked process.
CKPT_CHECK = "ch"       # rewind to the programmer checkpoint with this id
CKPT_DELIVERY = "recv"  # undo the delivery of the message with this id
CKPT_SPAWN = "sp"       # this whole process must unwind and disappear


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    id: int  # unique id for ch/recv; child pid index for sp

    def __str__(self) -> str:
        return f"#{self.kind}{self.id}"


Mark = frozenset


@dataclass(frozen=True)
class RProcess:
    pid: Pid
    env: Env
    expr: Expr
    mailbox: tuple[Msg, ...] = ()
    hist: Hist = None
    mark: Optional[Mark] = None
    failure: Optional[str] = None


@dataclass(frozen=True)
class RSystem:
    gamma: Gamma
    pool: dict[Pid, RProcess]
    next_pid: int
    next_id: int

    def proc(self, pid: Pid) -> RProcess:
        try:
            return self.pool[pid]
        except KeyError:
            raise SemanticsError(f"no such process {pid}") from None


def initial_rsystem(mod: Module, entry: FName) -> RSystem:
    if mod.fun(entry) is None:
        raise SemanticsError(f"entry function {entry} not defined")
    if entry.arity != 0:
        raise SemanticsError(f"entry function {entry} must have arity 0")
    root = Pid(0)
    proc = RProcess(root, {}, Apply(entry, ()))
    return RSystem(gamma={}, pool={root: proc}, next_pid=1, next_id=0)


def project(sys_: RSystem) -> System:
    """Forget histories and marks, yielding a standard system."""
    pool = {
        pid: Process(p.pid, p.env, p.expr, p.mailbox, p.failure)
        for pid, p in sys_.pool.items()
    }
    return System(gamma=dict(sys_.gamma), pool=pool, next_pid=sys_.next_pid,
                  next_id=sys_.next_id)


# ---------------------------------------------------------------------------
# Forward stepping
# ---------------------------------------------------------------------------


def _with(sys_: RSystem, proc: RProcess, **changes) -> RSystem:
    pool = dict(sys_.pool)
    pool[proc.pid] = replace(proc, **changes)
    return replace(sys_, pool=pool)


def fstep(mod: Module, sys_: RSystem, choice: StepChoice) -> RSystem:
    """One forward step recording its undo information.

    Marked processes are not available to the forward semantics; both
    stepping them and delivering to them raises ChoiceNotEnabled.
    """
    if isinstance(choice, Deliver):
        rec = sys_.pool.get(choice.receiver)
        if rec is None:
            raise ChoiceNotEnabled(f"receiver {choice.receiver} does not exist")
        if rec.mark is not None:
            raise ChoiceNotEnabled(f"{rec.pid} is rolling back")
        if rec.failure is not None:
            raise ChoiceNotEnabled(f"{rec.pid} has failed")
        msg, gamma = gamma_pop_oldest(sys_.gamma, (choice.sender, choice.receiver))
        ev = DeliverEv(choice.sender, choice.receiver, msg)
        out = _with(sys_, rec, mailbox=rec.mailbox + (msg,),
                    hist=hist_push(rec.hist, ev))
        return replace(out, gamma=gamma)

    proc = sys_.proc(choice.pid)
    if proc.mark is not None:
        raise ChoiceNotEnabled(f"{proc.pid} is rolling back")
    if proc.failure is not None:
        raise ChoiceNotEnabled(f"{proc.pid} has failed")
    try:
        res = step_expr(mod, proc.env, proc.expr)
    except RunError as err:
        return _with(sys_, proc, failure=str(err))
    if isinstance(res, Finished):
        raise ChoiceNotEnabled(f"{proc.pid} has finished")

    label = res.label
    if isinstance(label, TauL):
        ev = TauEv(proc.env, proc.expr)
        return _with(sys_, proc, env=res.env, expr=res.expr,
                     hist=hist_push(proc.hist, ev))

    if isinstance(label, SendL):
        if not isinstance(label.dest, Pid):
            return _with(sys_, proc, failure="send: destination is not a pid")
        t = sys_.next_id
        msg = Msg(t, label.payload)
        gamma = gamma_append(sys_.gamma, (proc.pid, label.dest), msg)
        ev = SendEv(label.dest, proc.env, proc.expr, t)
        out = _with(sys_, proc, env=res.env, expr=res.expr,
                    hist=hist_push(proc.hist, ev))
        return replace(out, gamma=gamma, next_id=t + 1)

    if isinstance(label, RecL):
        try:
            hit = matchrec(mod, res.env, label.clauses, proc.mailbox)
        except RunError as err:
            return _with(sys_, proc, failure=str(err))
        if hit is None:
            raise ChoiceNotEnabled(f"{proc.pid} is waiting for a matching message")
        ev = RecEv(proc.env, proc.expr, proc.mailbox, hit.consumed.id)
        env = subst_extend(res.env, hit.bindings)
        expr = subst_hole(res.expr, hit.body)
        return _with(sys_, proc, env=env, expr=expr, mailbox=hit.new_mailbox,
                     hist=hist_push(proc.hist, ev))

    if isinstance(label, SpawnL):
        child_pid = Pid(sys_.next_pid)
        child = RProcess(child_pid, dict(res.env), Apply(label.fname, label.args))
        ev = SpawnEv(proc.env, proc.expr, child_pid)
        expr = subst_hole(res.expr, child_pid)
        pool = dict(sys_.pool)
        pool[proc.pid] = replace(proc, expr=expr, hist=hist_push(proc.hist, ev))
        pool[child_pid] = child
        return replace(sys_, pool=pool, next_pid=sys_.next_pid + 1)

    if isinstance(label, SelfL):
        ev = SelfEv(proc.env, proc.expr)
        expr = subst_hole(res.expr, proc.pid)
        return _with(sys_, proc, env=res.env, expr=expr,
                     hist=hist_push(proc.hist, ev))

    if isinstance(label, CheckL):
        t = sys_.next_id
        expr = subst_hole(res.expr, Uid(t))
        # Marker first, event on top: undoing restores the pre-check
        # control and only then exposes the checkpoint marker.
        hist = hist_push(proc.hist, CheckpointEv(t))
        hist = hist_push(hist, CheckEv(proc.env, proc.expr))
        out = _with(sys_, proc, env=res.env, expr=expr, hist=hist)
        return replace(out, next_id=t + 1)

    raise SemanticsError(f"unhandled label {label!r}")


def enabled_forward(mod: Module, sys_: RSystem) -> list[StepChoice]:
    """Enabled forward choices; marked and failed processes are out of
    play, both as actors and as delivery targets."""
    out: list[StepChoice] = []
    for pid in sorted(sys_.pool, key=lambda p: p.index):
        proc = sys_.pool[pid]
        if proc.mark is not None or proc.failure is not None:
            continue
        try:
            res = step_expr(mod, proc.env, proc.expr)
        except RunError:
            out.append(Local(pid))
            continue
        if isinstance(res, Finished):
            continue
        if isinstance(res.label, RecL):
            try:
                hit = matchrec(mod, res.env, res.label.clauses, proc.mailbox)
            except RunError:
                out.append(Local(pid))
                continue
            if hit is None:
                continue
        out.append(Local(pid))
    for (snd, rcv) in sorted(sys_.gamma, key=lambda k: (k[0].index, k[1].index)):
        target = sys_.pool.get(rcv)
        if target is None or target.mark is not None or target.failure is not None:
            continue
        out.append(Deliver(snd, rcv))
    return out


def checkpoints_of(proc: RProcess) -> list[int]:
    """Programmer checkpoint ids present in the history, newest first."""
    return [ev.id for ev in hist_iter(proc.hist) if isinstance(ev, CheckpointEv)]


def marked_pids(sys_: RSystem) -> list[Pid]:
    return sorted((p for p in sys_.pool if sys_.pool[p].mark is not None),
                  key=lambda p: p.index)
