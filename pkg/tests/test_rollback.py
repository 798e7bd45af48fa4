"""Backward rules, the rollback driver, and exact step inversion."""

from __future__ import annotations

import importlib
import logging

import pytest

from revactor.canon import digest
from revactor.explore import RandomPolicy, run_policy
from revactor.reversible import (
    CKPT_DELIVERY, Checkpoint, DeliverEv, checkpoints_of, enabled_forward,
    fstep, initial_rsystem,
)
from revactor.rollback import (
    StuckRollback, bstep, peek_backward_rule, pop_delivered_message,
    request_rollback, rollback, rollback_drive, undo_forward_step,
)
from revactor.syntax import FName, Lit, Pid, parse_module
from revactor.systems import Deliver, Local, Msg, SemanticsError

MAIN = FName("main", 0)

# One checkpoint, one send toward a sink that never consumes.
SENDER = parse_module("""module sender =
  main/0 = fun () ->
    let P = spawn(sink/0, []) in
    let _ = check in
    let _ = P ! a in
    done,
  sink/0 = fun () -> receive never -> x end
""")

# A third process racing its own messages into the same sink.
RACER = parse_module("""module racer =
  main/0 = fun () ->
    let P = spawn(sink/0, []) in
    let _ = spawn(other/1, [P]) in
    let _ = check in
    let _ = P ! a in
    done,
  other/1 = fun (P) -> let _ = P ! b1 in P ! b2,
  sink/0 = fun () -> receive never -> x end
""")


def drain(mod, sys_, pid, *, stop=None):
    """Step one process while enabled, optionally up to a control text."""
    from revactor.syntax import pretty_expr
    while Local(pid) in enabled_forward(mod, sys_):
        if stop is not None and pretty_expr(sys_.pool[pid].expr) == stop:
            break
        sys_ = fstep(mod, sys_, Local(pid))
    return sys_


def first_checkpoint(sys_, pid):
    ckpts = checkpoints_of(sys_.pool[pid])
    assert ckpts, f"{pid} has no checkpoint in its history"
    return ckpts[-1]


# ----------------------------------------------------------- marking

def test_request_rollback_marks_the_process(clientserver_check):
    sys_ = drain(clientserver_check, initial_rsystem(clientserver_check,
                                                     MAIN), Pid(0))
    t = first_checkpoint(sys_, Pid(0))
    marked = request_rollback(sys_, Pid(0), t)
    assert marked.pool[Pid(0)].mark == frozenset({Checkpoint("ch", t)})
    # marking is idempotent at the obligation level
    again = request_rollback(marked, Pid(0), t)
    assert again.pool[Pid(0)].mark == marked.pool[Pid(0)].mark


def test_unknown_checkpoint_logs_a_warning(clientserver_check, caplog):
    sys_ = initial_rsystem(clientserver_check, MAIN)
    with caplog.at_level(logging.WARNING, logger="revactor.rollback"):
        marked = request_rollback(sys_, Pid(0), 999)
    assert any("999" in r.message for r in caplog.records)
    with pytest.raises(StuckRollback, match="p0"):
        rollback_drive(clientserver_check, marked)


def test_bstep_requires_a_mark(clientserver_check):
    sys_ = initial_rsystem(clientserver_check, MAIN)
    with pytest.raises(SemanticsError, match="not marked"):
        bstep(clientserver_check, sys_, Pid(0))


# ------------------------------------------------------ individual rules

def test_rollback_restores_the_pre_checkpoint_state():
    sys_ = drain(SENDER, initial_rsystem(SENDER, MAIN), Pid(0),
                 stop="let _ = check in let _ = P ! a in done")
    before = sys_
    sys_ = drain(SENDER, sys_, Pid(0))
    t = first_checkpoint(sys_, Pid(0))
    rolled, applied = rollback(SENDER, sys_, Pid(0), t)
    assert digest(rolled) == digest(before)
    rules = [r for _, r in applied]
    assert rules.count("Send1") == 1, "the undelivered send leaves via Send1"
    assert rolled.gamma == {}


def test_discard_skips_checkpoints_passed_on_the_way():
    mod = parse_module("""module m =
  main/0 = fun () -> let _ = check in let _ = check in ok
""")
    sys_ = drain(mod, initial_rsystem(mod, MAIN), Pid(0))
    older, newer = sorted(checkpoints_of(sys_.pool[Pid(0)]))
    rolled, applied = rollback(mod, sys_, Pid(0), older)
    rules = [r for _, r in applied]
    assert "Discard" in rules, f"skipping #{newer} needs Discard: {rules}"
    assert checkpoints_of(rolled.pool[Pid(0)]) == []


def test_send2_marks_the_receiver_and_sched1_discharges():
    sys_ = drain(SENDER, initial_rsystem(SENDER, MAIN), Pid(0))
    sys_ = fstep(SENDER, sys_, Deliver(Pid(0), Pid(1)))
    msg_id = sys_.pool[Pid(1)].mailbox[-1].id
    t = first_checkpoint(sys_, Pid(0))
    sys_ = request_rollback(sys_, Pid(0), t)

    sys_, rule = bstep(SENDER, sys_, Pid(0))  # undo `done` lookup
    assert rule == "Internal"
    sys_, rule = bstep(SENDER, sys_, Pid(0))
    assert rule == "Send2"
    assert sys_.pool[Pid(1)].mark == \
        frozenset({Checkpoint(CKPT_DELIVERY, msg_id)})

    # the sender cannot move until the receiver undoes the delivery
    same, rule = bstep(SENDER, sys_, Pid(0))
    assert rule == "Blocked" and same is sys_
    assert peek_backward_rule(SENDER, sys_, Pid(0)) == "Blocked"

    sys_, rule = bstep(SENDER, sys_, Pid(1))
    assert rule == "Sched1"
    assert sys_.pool[Pid(1)].mark == frozenset()
    assert [m.id for m in sys_.gamma[(Pid(0), Pid(1))]] == [msg_id]

    sys_, rule = bstep(SENDER, sys_, Pid(1))
    assert rule == "Stop1"
    assert sys_.pool[Pid(1)].mark is None

    sys_, rule = bstep(SENDER, sys_, Pid(0))
    assert rule == "Send1"
    assert sys_.gamma == {}


def test_sched2_returns_foreign_deliveries_to_the_queue_head():
    mod = RACER
    sys_ = initial_rsystem(mod, MAIN)
    sys_ = drain(mod, sys_, Pid(0))
    sys_ = drain(mod, sys_, Pid(2))  # other/1 sends b1, b2
    sys_ = drain(mod, sys_, Pid(1))
    sys_ = fstep(mod, sys_, Deliver(Pid(0), Pid(1)))  # a arrives first
    sys_ = fstep(mod, sys_, Deliver(Pid(2), Pid(1)))  # then b1
    assert [m.value for m in sys_.pool[Pid(1)].mailbox] == \
        [Lit("a"), Lit("b1")]

    t = first_checkpoint(sys_, Pid(0))
    rolled, applied = rollback(mod, sys_, Pid(0), t)
    rules = [r for _, r in applied]
    assert "Sched2" in rules
    assert rules.index("Sched2") < rules.index("Sched1")
    # b1 went back in front of the still-queued b2
    assert [m.value for m in rolled.gamma[(Pid(2), Pid(1))]] == \
        [Lit("b1"), Lit("b2")]
    assert rolled.pool[Pid(1)].mailbox == ()
    assert (Pid(0), Pid(1)) not in rolled.gamma


def test_spawn_undo_unwinds_and_deletes_the_child():
    mod = parse_module("""module m =
  main/0 = fun () ->
    let _ = check in
    let K = spawn(idle/0, []) in
    done,
  idle/0 = fun () -> ok
""")
    sys_ = drain(mod, initial_rsystem(mod, MAIN), Pid(0))
    sys_ = drain(mod, sys_, Pid(1))
    assert len(sys_.pool) == 2
    t = first_checkpoint(sys_, Pid(0))
    rolled, applied = rollback(mod, sys_, Pid(0), t)
    rules = [r for _, r in applied]
    assert "Spawn" in rules and "Stop2" in rules
    assert list(rolled.pool) == [Pid(0)]
    # the marker was consumed; control is back in front of the check
    assert checkpoints_of(rolled.pool[Pid(0)]) == []
    from revactor.syntax import pretty_expr
    assert pretty_expr(rolled.pool[Pid(0)].expr) == \
        "let _ = check in let K = spawn(idle/0, []) in done"


def test_receive_undo_restores_the_mailbox_snapshot():
    mod = parse_module("""module m =
  main/0 = fun () ->
    let P = spawn(sink/0, []) in
    let _ = check in
    P ! a,
  sink/0 = fun () -> receive a -> used end
""")
    sys_ = drain(mod, initial_rsystem(mod, MAIN), Pid(0))
    sys_ = drain(mod, sys_, Pid(1))
    sys_ = fstep(mod, sys_, Deliver(Pid(0), Pid(1)))
    sys_ = drain(mod, sys_, Pid(1))  # consume, then look up `used`
    assert sys_.pool[Pid(1)].mailbox == ()
    t = first_checkpoint(sys_, Pid(0))
    rolled, applied = rollback(mod, sys_, Pid(0), t)
    assert [r for _, r in applied].count("Receive") == 1
    assert rolled.pool[Pid(1)].mailbox == ()
    assert rolled.gamma == {}, "the undone send took its message home"


# ----------------------------------------------------------- the driver

def test_drive_is_deterministic(clientserver_check):
    mod = clientserver_check
    run = run_policy(mod, MAIN, RandomPolicy(3), max_steps=40)
    sys_ = run.final
    ckpts = checkpoints_of(sys_.pool[Pid(0)])
    if not ckpts:
        pytest.skip("run ended before the first checkpoint")
    marked = request_rollback(sys_, Pid(0), ckpts[-1])
    a_sys, a_applied = rollback_drive(mod, marked)
    b_sys, b_applied = rollback_drive(mod, marked)
    assert a_applied == b_applied
    assert digest(a_sys) == digest(b_sys)


def test_drive_involves_only_marked_processes(clientserver_check):
    mod = clientserver_check
    sys_ = initial_rsystem(mod, MAIN)
    policy = RandomPolicy(9)
    for _ in range(40):
        enabled = enabled_forward(mod, sys_)
        if not enabled:
            break
        sys_ = fstep(mod, sys_, policy.choose(enabled, sys_))
    ckpts = checkpoints_of(sys_.pool[Pid(0)])
    if not ckpts:
        pytest.skip("run ended before the first checkpoint")
    untouched = Pid(2)
    before = sys_.pool.get(untouched)
    rolled, applied = rollback(mod, sys_, Pid(0), ckpts[-1])
    touched = {pid for pid, _ in applied}
    if untouched not in touched and before is not None:
        assert rolled.pool[untouched] == before


def test_mailbox_tail_discipline():
    mb = (Msg(0, Lit("a")), Msg(1, Lit("b")))
    assert pop_delivered_message(mb, Msg(1, Lit("b"))) == (Msg(0, Lit("a")),)
    with pytest.raises(SemanticsError, match="tail"):
        pop_delivered_message(mb, Msg(0, Lit("a")))
    with pytest.raises(SemanticsError, match="tail"):
        pop_delivered_message((), Msg(0, Lit("a")))


def test_corrupted_delivery_undo_is_caught(monkeypatch):
    """Fault injection: a wrong Sched undo must not go unnoticed.

    The sink holds [b1, a] when the rollback undoes a's delivery.  An
    undo that drops the mailbox head instead of the tail leaves [a]
    where [b1] belongs; the canonical comparison used throughout this
    suite must see the difference (or the drive must fail outright).
    """
    mod = RACER
    sys_ = initial_rsystem(mod, MAIN)
    sys_ = drain(mod, sys_, Pid(0))
    sys_ = drain(mod, sys_, Pid(2))
    sys_ = drain(mod, sys_, Pid(1))
    sys_ = fstep(mod, sys_, Deliver(Pid(2), Pid(1)))  # b1 arrives first
    sys_ = fstep(mod, sys_, Deliver(Pid(0), Pid(1)))  # then a
    t = first_checkpoint(sys_, Pid(0))
    truth, _ = rollback(mod, sys_, Pid(0), t)
    assert [m.value for m in truth.pool[Pid(1)].mailbox] == [Lit("b1")]

    def corrupt_pop(mailbox, msg):
        return mailbox[1:]  # drops the head, keeps the tail

    # the package re-exports rollback(), shadowing the submodule name,
    # so resolve the module through importlib
    rb = importlib.import_module("revactor.rollback")
    monkeypatch.setattr(rb, "pop_delivered_message", corrupt_pop)
    try:
        corrupted, _ = rollback(mod, sys_, Pid(0), t)
    except (SemanticsError, StuckRollback):
        return
    assert digest(corrupted) != digest(truth)


# --------------------------------------------------- exact step inversion

@pytest.mark.parametrize("seed", range(4))
def test_undo_forward_step_is_the_exact_inverse(clientserver_check, seed):
    """Undoing each recorded step restores the state dataclass-equal,
    fresh-pid and fresh-id counters included."""
    mod = clientserver_check
    run = run_policy(mod, MAIN, RandomPolicy(seed), max_steps=50)
    states = [initial_rsystem(mod, MAIN)] + [s for _, _, s in run.steps]
    sys_ = states[-1]
    for (choice, _, _), prev in zip(reversed(run.steps), reversed(states[:-1])):
        sys_ = undo_forward_step(mod, sys_, choice)
        assert sys_ == prev


def test_undo_forward_step_rejects_mismatched_history(clientserver):
    sys_ = initial_rsystem(clientserver, MAIN)
    with pytest.raises(SemanticsError):
        undo_forward_step(clientserver, sys_, Local(Pid(0)))
    sys_ = fstep(clientserver, sys_, Local(Pid(0)))
    with pytest.raises(SemanticsError):
        undo_forward_step(clientserver, sys_, Deliver(Pid(0), Pid(0)))
