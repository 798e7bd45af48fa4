"""Property checkers for the reversible semantics.

* check_loop: every forward step can be undone exactly (including the
  fresh-identifier counters) and redone to the same successor, along
  randomly scheduled runs.
* check_soundness: states reached by mixing forward execution with
  checkpoint rollbacks are, ignoring histories and message tags, states
  the system could have reached by forward execution alone.
* check_fifo: between every ordered process pair, messages are
  delivered in the order they were sent.

All checkers return report dictionaries with a `violations` list; an
empty list means the property held on everything that was explored.
Exploration-based checks also report whether limits truncated the
search.
"""

from __future__ import annotations

import random
import time
from typing import Optional

from .canon import digest
from .explore import explore
from .reversible import (
    RSystem, SendEv, checkpoints_of, enabled_forward, fstep, initial_rsystem,
)
from .rollback import StuckRollback, rollback, undo_forward_step
from .syntax import FName, Module, Pid, pretty_expr
from .systems import Deliver, Local, StepChoice


def _choice_str(choice: StepChoice) -> str:
    if isinstance(choice, Local):
        return f"local {choice.pid}"
    return f"deliver {choice.sender}->{choice.receiver}"


def diff_systems(a: RSystem, b: RSystem) -> str:
    """First observable difference between two systems, for reports."""
    if a.next_pid != b.next_pid or a.next_id != b.next_id:
        return (f"counters differ: pid {a.next_pid}/{b.next_pid} "
                f"id {a.next_id}/{b.next_id}")
    for pid in sorted(set(a.pool) | set(b.pool), key=lambda p: p.index):
        pa, pb = a.pool.get(pid), b.pool.get(pid)
        if pa is None or pb is None:
            return f"{pid} exists only on one side"
        if pa.env != pb.env:
            return f"{pid} environments differ"
        if pa.expr != pb.expr:
            return (f"{pid} expressions differ: "
                    f"{pretty_expr(pa.expr)} vs {pretty_expr(pb.expr)}")
        if pa.mailbox != pb.mailbox:
            return f"{pid} mailboxes differ"
        if pa.hist != pb.hist:
            return f"{pid} histories differ"
        if pa.mark != pb.mark:
            return f"{pid} marks differ"
        if pa.failure != pb.failure:
            return f"{pid} failure states differ"
    if a.gamma != b.gamma:
        return "global mailboxes differ"
    return "systems are equal"


# ---------------------------------------------------------------------------
# Loop property
# ---------------------------------------------------------------------------


def check_loop(
    mod: Module,
    entry: FName,
    *,
    runs: int = 20,
    max_steps: int = 50,
    seed: int = 0,
) -> dict:
    """Undo/redo every step of seeded random runs and compare exactly.

    Steps that freeze a process (runtime faults record no history) are
    executed but not undone.
    """
    t0 = time.monotonic()
    counterexamples: list[dict] = []
    steps_checked = 0
    for run in range(runs):
        rng = random.Random(seed + 0x9E3779B9 * run)
        sys_ = initial_rsystem(mod, entry)
        taken: list[StepChoice] = []
        for step in range(max_steps):
            enabled = enabled_forward(mod, sys_)
            if not enabled:
                break
            choice = rng.choice(enabled)
            taken.append(choice)
            nxt = fstep(mod, sys_, choice)
            froze = (
                isinstance(choice, Local)
                and nxt.pool[choice.pid].failure is not None
                and sys_.pool[choice.pid].failure is None
            )
            if froze:
                sys_ = nxt
                continue
            back = undo_forward_step(mod, nxt, choice)
            if back != sys_:
                counterexamples.append({
                    "run": run,
                    "step": step,
                    "choice_seq": [_choice_str(c) for c in taken],
                    "diff": "undo mismatch: " + diff_systems(back, sys_),
                })
                break
            redo = fstep(mod, back, choice)
            if redo != nxt:
                counterexamples.append({
                    "run": run,
                    "step": step,
                    "choice_seq": [_choice_str(c) for c in taken],
                    "diff": "redo mismatch: " + diff_systems(redo, nxt),
                })
                break
            steps_checked += 1
            sys_ = nxt
    return {
        "property": "loop",
        "runs": runs,
        "checked_states": steps_checked,
        "violations": counterexamples,
        "truncated": False,
        "elapsed_s": round(time.monotonic() - t0, 3),
    }


# ---------------------------------------------------------------------------
# Rollback soundness
# ---------------------------------------------------------------------------


def check_soundness(
    mod: Module,
    entry: FName,
    *,
    max_depth: int = 30,
    max_rollbacks: int = 2,
    max_states: int = 5_000,
    margin: int = 5,
    forward_max_states: int = 50_000,
) -> dict:
    """Mixed forward/rollback exploration against the forward-only set.

    The forward-reachable reference set is computed to max_depth plus a
    margin, since a rolled-back-and-replayed state never needs a longer
    forward witness than the forward steps actually taken.  Every mixed
    state (always unmarked: rollbacks are driven to completion) must
    project onto a member of that set.
    """
    t0 = time.monotonic()
    fwd = explore(mod, entry, reversible=False,
                  max_depth=max_depth + margin, max_states=forward_max_states)
    reference = set(fwd.nodes)

    root = initial_rsystem(mod, entry)
    root_key = digest(root, include_history=True)
    seen: set[tuple[str, int]] = {(root_key, 0)}
    parents: dict[tuple[str, int], Optional[tuple[tuple[str, int], str]]] = {
        (root_key, 0): None
    }
    frontier: list[tuple[RSystem, int, int, tuple[str, int]]] = [(root, 0, 0, (root_key, 0))]
    violations: list[dict] = []
    truncated = fwd.truncated
    checked = 0

    def path_to(key: tuple[str, int]) -> list[str]:
        out: list[str] = []
        cur: Optional[tuple[tuple[str, int], str]] = parents[key]
        while cur is not None:
            parent_key, action = cur
            out.append(action)
            cur = parents[parent_key]
        return list(reversed(out))

    while frontier:
        next_frontier: list[tuple[RSystem, int, int, tuple[str, int]]] = []
        for sys_, depth, rolls, key in frontier:
            checked += 1
            if digest(sys_, include_history=False) not in reference:
                violations.append({
                    "choice_seq": path_to(key),
                    "diff": "state is not forward-reachable "
                            f"(projected digest {digest(sys_, include_history=False)[:12]})",
                })
                continue

            successors: list[tuple[RSystem, int, int, str]] = []
            if depth < max_depth:
                for choice in enabled_forward(mod, sys_):
                    successors.append(
                        (fstep(mod, sys_, choice), depth + 1, rolls, _choice_str(choice))
                    )
            elif enabled_forward(mod, sys_):
                truncated = True
            if rolls < max_rollbacks:
                for pid in sorted(sys_.pool, key=lambda p: p.index):
                    for ckpt in checkpoints_of(sys_.pool[pid]):
                        action = f"rollback {pid} #ch{ckpt}"
                        try:
                            rolled, _ = rollback(mod, sys_, pid, ckpt)
                        except StuckRollback as err:
                            violations.append({
                                "choice_seq": path_to(key) + [action],
                                "diff": f"stuck rollback: {err}",
                            })
                            continue
                        successors.append((rolled, depth, rolls + 1, action))

            for succ, sdepth, srolls, action in successors:
                skey = (digest(succ, include_history=True), srolls)
                if skey in seen:
                    continue
                if len(seen) >= max_states:
                    truncated = True
                    continue
                seen.add(skey)
                parents[skey] = (key, action)
                next_frontier.append((succ, sdepth, srolls, skey))
        frontier = next_frontier

    return {
        "property": "soundness",
        "checked_states": checked,
        "forward_states": len(reference),
        "violations": violations,
        "truncated": truncated,
        "elapsed_s": round(time.monotonic() - t0, 3),
    }


# ---------------------------------------------------------------------------
# FIFO delivery per ordered pair
# ---------------------------------------------------------------------------


def check_fifo(
    mod: Module,
    entry: FName,
    *,
    runs: int = 100,
    max_steps: int = 60,
    seed: int = 0,
) -> dict:
    """Random runs asserting per-pair send order equals delivery order."""
    t0 = time.monotonic()
    violations: list[dict] = []
    deliveries = 0
    for run in range(runs):
        rng = random.Random(seed + 0x9E3779B9 * run)
        sys_ = initial_rsystem(mod, entry)
        sent: dict[tuple[Pid, Pid], list[int]] = {}
        got: dict[tuple[Pid, Pid], list[int]] = {}
        taken: list[StepChoice] = []
        for _ in range(max_steps):
            enabled = enabled_forward(mod, sys_)
            if not enabled:
                break
            choice = rng.choice(enabled)
            taken.append(choice)
            nxt = fstep(mod, sys_, choice)
            if isinstance(choice, Deliver):
                pair = (choice.sender, choice.receiver)
                msg = nxt.pool[choice.receiver].mailbox[-1]
                got.setdefault(pair, []).append(msg.id)
                deliveries += 1
            else:
                proc = nxt.pool[choice.pid]
                if proc.hist is not None and isinstance(proc.hist[0], SendEv):
                    ev = proc.hist[0]
                    sent.setdefault((choice.pid, ev.dest), []).append(ev.id)
            sys_ = nxt
        for pair, order in got.items():
            expected = sent.get(pair, [])[: len(order)]
            if order != expected:
                violations.append({
                    "run": run,
                    "pair": f"{pair[0]}->{pair[1]}",
                    "sent": sent.get(pair, []),
                    "delivered": order,
                    "choice_seq": [_choice_str(c) for c in taken],
                })
    return {
        "property": "fifo",
        "runs": runs,
        "checked_states": deliveries,
        "violations": violations,
        "truncated": False,
        "elapsed_s": round(time.monotonic() - t0, 3),
    }
