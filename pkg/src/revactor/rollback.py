"""Causal-consistent backward semantics and rollback driver.

Rolling a process back never silently discards the effects other
processes observed.  Instead, a marked process carries a set of pending
obligations and is driven backwards one history event at a time:

* undoing a tau, self or check event restores the recorded control;
* undoing a receive restores the control and the full mailbox snapshot;
* undoing a send removes the sent message from the global mailbox if it
  is still in transit (Send1); if it was already delivered, the receiver
  is marked with an obligation to undo that delivery first (Send2), and
  the send is retried once the message is back in transit;
* undoing a delivery removes the message from the tail of the local
  mailbox and returns it to the head of its in-transit queue (Sched2;
  Sched1 additionally discharges the matching obligation);
* undoing a spawn marks the child for full unwinding; once the child
  has unwound to its initial state it deletes itself (Stop2), and the
  parent's spawn event can then be popped.

A rollback request targets a programmer checkpoint id.  The checkpoint
marker entry in the history discharges that obligation when reached
(Check); markers for other checkpoints passed on the way are dropped
(Discard).  A process whose obligation set is empty unmarks itself and
resumes normal forward execution (Stop1).

Blocked processes (waiting on a peer) make no state change; the driver
round-robins over marked processes, lowest pid first, and reports a
stuck rollback if a full pass makes no progress.

`undo_forward_step` is the exact single-step inverse of `fstep`, used
by the reversibility checker; unlike the rollback rules it also rewinds
the fresh pid/id counters so the original state is restored verbatim.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

from .reversible import (
    CheckEv, CheckpointEv, Checkpoint, CKPT_CHECK, CKPT_DELIVERY, CKPT_SPAWN,
    DeliverEv, HistEvent, Hist, RecEv, RProcess, RSystem, SelfEv, SendEv,
    SpawnEv, TauEv, checkpoints_of, hist_iter, marked_pids,
)
from .syntax import Module, Pid
from .systems import (
    Deliver, Local, Msg, SemanticsError, StepChoice, gamma_prepend,
    gamma_remove_id,
)

log = logging.getLogger(__name__)


class StuckRollback(Exception):
    """No backward rule applies although obligations remain."""


# Seam for fault-injection tests: removing a delivered message from the
# local mailbox during Sched1/Sched2 undo.  The message must sit at the
# mailbox tail; anything else means the histories are corrupt.
def pop_delivered_message(mailbox: tuple[Msg, ...], msg: Msg) -> tuple[Msg, ...]:
    if not mailbox or mailbox[-1] != msg:
        raise SemanticsError(
            f"delivery undo expects message #{msg.id} at the mailbox tail"
        )
    return mailbox[:-1]


def _with(sys_: RSystem, pid: Pid, proc: RProcess) -> RSystem:
    pool = dict(sys_.pool)
    pool[pid] = proc
    return replace(sys_, pool=pool)


def request_rollback(sys_: RSystem, pid: Pid, checkpoint: int) -> RSystem:
    """Mark a process with the obligation to rewind to a checkpoint.

    An id that does not occur in the process history only logs a
    warning; driving such a rollback unwinds the whole history and then
    reports a stuck rollback.
    """
    proc = sys_.proc(pid)
    if checkpoint not in checkpoints_of(proc):
        log.warning("checkpoint #ch%s not in history of %s", checkpoint, pid)
    obligation = Checkpoint(CKPT_CHECK, checkpoint)
    mark = (proc.mark or frozenset()) | {obligation}
    return _with(sys_, pid, replace(proc, mark=mark))


# ---------------------------------------------------------------------------
# Single backward step
# ---------------------------------------------------------------------------


def bstep(mod: Module, sys_: RSystem, pid: Pid) -> tuple[RSystem, str]:
    """Apply one backward rule to a marked process.

    Returns the new system and the applied rule name.  When the process
    is blocked on a peer the system is returned unchanged (identity)
    with rule name "Blocked".  Raises StuckRollback when the history is
    exhausted with undischargeable obligations left.
    """
    proc = sys_.proc(pid)
    if proc.mark is None:
        raise SemanticsError(f"{pid} is not marked for rollback")

    if not proc.mark:
        return _with(sys_, pid, replace(proc, mark=None)), "Stop1"

    if proc.hist is None:
        if proc.mark == frozenset({Checkpoint(CKPT_SPAWN, pid.index)}):
            pool = dict(sys_.pool)
            del pool[pid]
            return replace(sys_, pool=pool), "Stop2"
        raise StuckRollback(
            f"{pid} exhausted its history with obligations "
            f"{sorted(str(c) for c in proc.mark)}"
        )

    ev, rest = proc.hist

    if isinstance(ev, CheckpointEv):
        obligation = Checkpoint(CKPT_CHECK, ev.id)
        if obligation in proc.mark:
            new = replace(proc, hist=rest, mark=proc.mark - {obligation})
            return _with(sys_, pid, new), "Check"
        return _with(sys_, pid, replace(proc, hist=rest)), "Discard"

    if isinstance(ev, TauEv):
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        return _with(sys_, pid, new), "Internal"

    if isinstance(ev, SelfEv):
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        return _with(sys_, pid, new), "Self"

    if isinstance(ev, CheckEv):
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        return _with(sys_, pid, new), "Check"

    if isinstance(ev, RecEv):
        new = replace(proc, env=ev.env, expr=ev.expr, mailbox=ev.mailbox, hist=rest)
        return _with(sys_, pid, new), "Receive"

    if isinstance(ev, SendEv):
        msg, gamma = gamma_remove_id(sys_.gamma, (pid, ev.dest), ev.id)
        if msg is not None:
            new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
            return replace(_with(sys_, pid, new), gamma=gamma), "Send1"
        receiver = sys_.pool.get(ev.dest)
        if receiver is None:
            raise SemanticsError(
                f"message #{ev.id} is neither in transit nor does {ev.dest} exist"
            )
        obligation = Checkpoint(CKPT_DELIVERY, ev.id)
        if receiver.mark is not None and obligation in receiver.mark:
            return sys_, "Blocked"
        mark = (receiver.mark or frozenset()) | {obligation}
        return _with(sys_, ev.dest, replace(receiver, mark=mark)), "Send2"

    if isinstance(ev, SpawnEv):
        child = sys_.pool.get(ev.child)
        if child is None:
            new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
            return _with(sys_, pid, new), "Spawn"
        obligation = Checkpoint(CKPT_SPAWN, ev.child.index)
        if child.mark is not None and obligation in child.mark:
            return sys_, "Blocked"
        mark = (child.mark or frozenset()) | {obligation}
        return _with(sys_, ev.child, replace(child, mark=mark)), "Spawn"

    if isinstance(ev, DeliverEv):
        mailbox = pop_delivered_message(proc.mailbox, ev.msg)
        gamma = gamma_prepend(sys_.gamma, (ev.sender, pid), ev.msg)
        obligation = Checkpoint(CKPT_DELIVERY, ev.msg.id)
        if obligation in proc.mark:
            new = replace(proc, mailbox=mailbox, hist=rest,
                          mark=proc.mark - {obligation})
            rule = "Sched1"
        else:
            new = replace(proc, mailbox=mailbox, hist=rest)
            rule = "Sched2"
        return replace(_with(sys_, pid, new), gamma=gamma), rule

    raise SemanticsError(f"unhandled history event {ev!r}")


def peek_backward_rule(mod: Module, sys_: RSystem, pid: Pid) -> Optional[str]:
    """Rule name the next bstep on this process would apply, if any."""
    proc = sys_.pool.get(pid)
    if proc is None or proc.mark is None:
        return None
    try:
        _, rule = bstep(mod, sys_, pid)
    except StuckRollback:
        return "Stuck"
    return rule


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def rollback_drive(
    mod: Module, sys_: RSystem
) -> tuple[RSystem, list[tuple[Pid, str]]]:
    """Drive all marked processes backwards until none is marked.

    Deterministic: always attempts the lowest marked pid first, falling
    through to higher pids only when lower ones are blocked.  Raises
    StuckRollback if a full pass over the marked processes changes
    nothing.
    """
    applied: list[tuple[Pid, str]] = []
    budget = _drive_budget(sys_)
    while True:
        marked = marked_pids(sys_)
        if not marked:
            return sys_, applied
        for pid in marked:
            new_sys, rule = bstep(mod, sys_, pid)
            if new_sys is not sys_:
                applied.append((pid, rule))
                sys_ = new_sys
                break
        else:
            raise StuckRollback(
                f"no backward rule applicable to marked processes "
                f"{[str(p) for p in marked]}"
            )
        budget -= 1
        if budget < 0:
            raise SemanticsError("rollback drive exceeded its step budget")


def _drive_budget(sys_: RSystem) -> int:
    total_hist = sum(_hist_length(p.hist) for p in sys_.pool.values())
    return 4 * total_hist + 8 * len(sys_.pool) + 64


def _hist_length(hist: Hist) -> int:
    n = 0
    for _ in hist_iter(hist):
        n += 1
    return n


def rollback(
    mod: Module, sys_: RSystem, pid: Pid, checkpoint: int
) -> tuple[RSystem, list[tuple[Pid, str]]]:
    """Convenience: request a checkpoint rollback and drive it home."""
    return rollback_drive(mod, request_rollback(sys_, pid, checkpoint))


# ---------------------------------------------------------------------------
# Exact single-step inverse of fstep (for the reversibility checker)
# ---------------------------------------------------------------------------


def undo_forward_step(mod: Module, sys_: RSystem, choice: StepChoice) -> RSystem:
    """Invert the fstep that `choice` just performed, counters included.

    The top history event of the acting process must correspond to the
    choice; anything else is an invariant violation.
    """
    if isinstance(choice, Deliver):
        proc = sys_.proc(choice.receiver)
        ev, rest = _top(proc, DeliverEv)
        if ev.sender != choice.sender:
            raise SemanticsError("delivery history does not match the choice")
        mailbox = pop_delivered_message(proc.mailbox, ev.msg)
        gamma = gamma_prepend(sys_.gamma, (ev.sender, proc.pid), ev.msg)
        new = replace(proc, mailbox=mailbox, hist=rest)
        return replace(_with(sys_, proc.pid, new), gamma=gamma)

    proc = sys_.proc(choice.pid)
    if proc.hist is None:
        raise SemanticsError(f"{proc.pid} has no history to undo")
    ev, rest = proc.hist

    if isinstance(ev, (TauEv, SelfEv)):
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        return _with(sys_, proc.pid, new)

    if isinstance(ev, CheckEv):
        if rest is None or not isinstance(rest[0], CheckpointEv):
            raise SemanticsError("check event without its checkpoint marker")
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest[1])
        out = _with(sys_, proc.pid, new)
        return replace(out, next_id=sys_.next_id - 1)

    if isinstance(ev, RecEv):
        new = replace(proc, env=ev.env, expr=ev.expr, mailbox=ev.mailbox, hist=rest)
        return _with(sys_, proc.pid, new)

    if isinstance(ev, SendEv):
        msg, gamma = gamma_remove_id(sys_.gamma, (proc.pid, ev.dest), ev.id)
        if msg is None:
            raise SemanticsError(f"sent message #{ev.id} is not in transit")
        new = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        out = replace(_with(sys_, proc.pid, new), gamma=gamma)
        return replace(out, next_id=sys_.next_id - 1)

    if isinstance(ev, SpawnEv):
        child = sys_.pool.get(ev.child)
        if child is None or child.hist is not None or child.mailbox:
            raise SemanticsError(f"spawned child {ev.child} is not in its initial state")
        pool = dict(sys_.pool)
        del pool[ev.child]
        pool[proc.pid] = replace(proc, env=ev.env, expr=ev.expr, hist=rest)
        return replace(sys_, pool=pool, next_pid=sys_.next_pid - 1)

    raise SemanticsError(f"top history event {ev!r} does not match choice {choice!r}")


def _top(proc: RProcess, kind) -> tuple[HistEvent, Hist]:
    if proc.hist is None:
        raise SemanticsError(f"{proc.pid} has no history to undo")
    ev, rest = proc.hist
    if not isinstance(ev, kind):
        raise SemanticsError(
            f"expected a {kind.__name__} on top of {proc.pid}'s history"
        )
    return ev, rest
