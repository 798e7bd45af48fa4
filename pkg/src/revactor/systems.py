"""Standard (irreversible) system semantics for the actor language.

A system is a global mailbox together with a pool of processes.  The
global mailbox holds, for every ordered (sender, receiver) pair, a FIFO
queue of messages in transit.  Each process owns a pid, a control
(environment, expression), and a local mailbox.

System steps come in two flavours, and every enabled step is named by a
StepChoice so schedulers and exploration can pick deterministically:

* Local(pid): the process performs one expression step.  Tau steps just
  advance; send appends to the global mailbox; receive consumes the
  oldest matching local message; spawn creates a child that applies the
  named function to the unevaluated arguments; self and check fill the
  hole with the own pid or a fresh unique identifier.
* Deliver(sender, receiver): the scheduler moves the oldest in-transit
  message of that pair to the tail of the receiver's local mailbox.

Message payloads are wrapped in Msg records carrying a unique id.  The
standard semantics never inspects the id during matching; it exists so
runs line up state-by-state with the history-recording semantics.

Runtime faults freeze the faulting process: its failure field is set
and it never steps again, but other processes continue.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .exprstep import (
    CheckL, Finished, RecL, RunError, SelfL, SendL, SpawnL, TauL,
    eval_guard, step_expr, subst_hole,
)
from .syntax import (
    Apply, Clause, Env, Expr, FName, Lit, Module, Pid, Uid, Value,
    match_pattern, subst_extend,
)

GammaKey = tuple[Pid, Pid]


@dataclass(frozen=True)
class Msg:
    """A payload tagged with the unique id drawn when it was sent."""

    id: int
    value: Value


Gamma = dict[GammaKey, tuple[Msg, ...]]


class SemanticsError(Exception):
    """Internal invariant violation in the system semantics."""


class ChoiceNotEnabled(Exception):
    """The requested StepChoice cannot fire in the current state."""


@dataclass(frozen=True)
class Process:
    pid: Pid
    env: Env
    expr: Expr
    mailbox: tuple[Msg, ...] = ()
    failure: Optional[str] = None


@dataclass(frozen=True)
class System:
    gamma: Gamma
    pool: dict[Pid, Process]
    next_pid: int
    next_id: int

    def proc(self, pid: Pid) -> Process:
        try:
            return self.pool[pid]
        except KeyError:
            raise SemanticsError(f"no such process {pid}") from None


@dataclass(frozen=True)
class Local:
    """Choice: let this process take one expression-level step."""

    pid: Pid

    def sort_key(self) -> tuple:
        return (0, self.pid.index, 0)


@dataclass(frozen=True)
class Deliver:
    """Choice: move the oldest in-transit (sender, receiver) message."""

    sender: Pid
    receiver: Pid

    def sort_key(self) -> tuple:
        return (1, self.sender.index, self.receiver.index)


StepChoice = Union[Local, Deliver]


def initial_system(mod: Module, entry: FName) -> System:
    """Fresh system: a single root process applying the entry function."""
    fd = mod.fun(entry)
    if fd is None:
        raise SemanticsError(f"entry function {entry} not defined")
    if entry.arity != 0:
        raise SemanticsError(f"entry function {entry} must have arity 0")
    root = Pid(0)
    proc = Process(root, {}, Apply(entry, ()))
    return System(gamma={}, pool={root: proc}, next_pid=1, next_id=0)


# ---------------------------------------------------------------------------
# Global mailbox helpers (pure; queues vanish when empty)
# ---------------------------------------------------------------------------


def gamma_append(gamma: Gamma, key: GammaKey, msg: Msg) -> Gamma:
    out = dict(gamma)
    out[key] = out.get(key, ()) + (msg,)
    return out


def gamma_pop_oldest(gamma: Gamma, key: GammaKey) -> tuple[Msg, Gamma]:
    queue = gamma.get(key, ())
    if not queue:
        raise ChoiceNotEnabled(f"no message in transit for {key[0]} -> {key[1]}")
    out = dict(gamma)
    if len(queue) == 1:
        del out[key]
    else:
        out[key] = queue[1:]
    return queue[0], out


def gamma_prepend(gamma: Gamma, key: GammaKey, msg: Msg) -> Gamma:
    out = dict(gamma)
    out[key] = (msg,) + out.get(key, ())
    return out


def gamma_remove_id(gamma: Gamma, key: GammaKey, msg_id: int) -> tuple[Optional[Msg], Gamma]:
    """Delete the message with this id from the pair's queue, wherever
    it sits.  Returns (message, new gamma) or (None, unchanged)."""
    queue = gamma.get(key, ())
    for i, m in enumerate(queue):
        if m.id == msg_id:
            rest = queue[:i] + queue[i + 1:]
            out = dict(gamma)
            if rest:
                out[key] = rest
            else:
                del out[key]
            return m, out
    return None, gamma


# ---------------------------------------------------------------------------
# Mailbox matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchRecHit:
    bindings: Env
    body: Expr
    new_mailbox: tuple[Msg, ...]
    consumed: Msg
    clause_index: int


def matchrec(
    mod: Module, env: Env, clauses: tuple[Clause, ...], mailbox: tuple[Msg, ...]
) -> Optional[MatchRecHit]:
    """Oldest message that matches some clause, with that clause.

    Scans the mailbox front (oldest) to back; for each message tries the
    clauses in order, pattern plus guard.  Returns None when no message
    matches (the receive suspends).  Matching sees payloads only; the
    message id is bookkeeping.
    """
    for i, msg in enumerate(mailbox):
        for ci, cl in enumerate(clauses):
            bindings = match_pattern(cl.pattern, msg.value)
            if bindings is None:
                continue
            gv = eval_guard(mod, subst_extend(env, bindings), cl.guard)
            if gv == Lit("true"):
                return MatchRecHit(
                    bindings=bindings,
                    body=cl.body,
                    new_mailbox=mailbox[:i] + mailbox[i + 1:],
                    consumed=msg,
                    clause_index=ci,
                )
            if gv != Lit("false"):
                raise RunError("receive guard evaluated to a non-boolean")
    return None


# ---------------------------------------------------------------------------
# System stepping
# ---------------------------------------------------------------------------


def _freeze(sys_: System, proc: Process, err: RunError) -> System:
    pool = dict(sys_.pool)
    pool[proc.pid] = replace(proc, failure=str(err))
    return replace(sys_, pool=pool)


def _with_proc(sys_: System, proc: Process, **changes) -> System:
    pool = dict(sys_.pool)
    pool[proc.pid] = replace(proc, **changes)
    return replace(sys_, pool=pool)


def step_system(mod: Module, sys_: System, choice: StepChoice) -> System:
    """Fire one enabled step; raises ChoiceNotEnabled otherwise.

    A RunError inside the expression step does not raise: the process
    freezes with the failure message recorded, which still counts as a
    successful system step.
    """
    if isinstance(choice, Deliver):
        msg, gamma = gamma_pop_oldest(sys_.gamma, (choice.sender, choice.receiver))
        rec = sys_.pool.get(choice.receiver)
        if rec is None:
            raise ChoiceNotEnabled(f"receiver {choice.receiver} does not exist")
        out = _with_proc(sys_, rec, mailbox=rec.mailbox + (msg,))
        return replace(out, gamma=gamma)

    proc = sys_.proc(choice.pid)
    if proc.failure is not None:
        raise ChoiceNotEnabled(f"{proc.pid} has failed")
    try:
        res = step_expr(mod, proc.env, proc.expr)
    except RunError as err:
        return _freeze(sys_, proc, err)
    if isinstance(res, Finished):
        raise ChoiceNotEnabled(f"{proc.pid} has finished")

    label = res.label
    if isinstance(label, TauL):
        return _with_proc(sys_, proc, env=res.env, expr=res.expr)

    if isinstance(label, SendL):
        if not isinstance(label.dest, Pid):
            return _freeze(sys_, proc, RunError("send: destination is not a pid"))
        msg = Msg(sys_.next_id, label.payload)
        gamma = gamma_append(sys_.gamma, (proc.pid, label.dest), msg)
        out = _with_proc(sys_, proc, env=res.env, expr=res.expr)
        return replace(out, gamma=gamma, next_id=sys_.next_id + 1)

    if isinstance(label, RecL):
        try:
            hit = matchrec(mod, res.env, label.clauses, proc.mailbox)
        except RunError as err:
            return _freeze(sys_, proc, err)
        if hit is None:
            raise ChoiceNotEnabled(f"{proc.pid} is waiting for a matching message")
        env = subst_extend(res.env, hit.bindings)
        expr = subst_hole(res.expr, hit.body)
        return _with_proc(sys_, proc, env=env, expr=expr, mailbox=hit.new_mailbox)

    if isinstance(label, SpawnL):
        child_pid = Pid(sys_.next_pid)
        child = Process(child_pid, dict(res.env), Apply(label.fname, label.args))
        expr = subst_hole(res.expr, child_pid)
        pool = dict(sys_.pool)
        pool[proc.pid] = replace(proc, env=res.env, expr=expr)
        pool[child_pid] = child
        return replace(sys_, pool=pool, next_pid=sys_.next_pid + 1)

    if isinstance(label, SelfL):
        expr = subst_hole(res.expr, proc.pid)
        return _with_proc(sys_, proc, env=res.env, expr=expr)

    if isinstance(label, CheckL):
        uid = Uid(sys_.next_id)
        expr = subst_hole(res.expr, uid)
        out = _with_proc(sys_, proc, env=res.env, expr=expr)
        return replace(out, next_id=sys_.next_id + 1)

    raise SemanticsError(f"unhandled label {label!r}")


def enabled_standard(mod: Module, sys_: System) -> list[StepChoice]:
    """All enabled choices, deterministically ordered: process-local
    steps by pid, then deliveries by (sender, receiver)."""
    out: list[StepChoice] = []
    for pid in sorted(sys_.pool, key=lambda p: p.index):
        proc = sys_.pool[pid]
        if proc.failure is not None:
            continue
        try:
            res = step_expr(mod, proc.env, proc.expr)
        except RunError:
            out.append(Local(pid))  # stepping will surface the failure
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
        if target is None or target.failure is not None:
            continue
        out.append(Deliver(snd, rcv))
    return out


def run_to_completion(
    mod: Module, sys_: System, choose, max_steps: int = 10_000
) -> tuple[System, list[StepChoice]]:
    """Drive the system with a choice function until quiescent.

    `choose(enabled, system)` picks among the enabled choices.  Returns
    the final system and the sequence of choices taken.
    """
    taken: list[StepChoice] = []
    for _ in range(max_steps):
        enabled = enabled_standard(mod, sys_)
        if not enabled:
            return sys_, taken
        choice = choose(enabled, sys_)
        sys_ = step_system(mod, sys_, choice)
        taken.append(choice)
    return sys_, taken
