"""Property checkers and the seeded program generator.

The checkers are validated in both directions: they stay quiet on
programs that satisfy their property, and they flag seeded mutations of
the semantics (undo that pops the wrong message, newest-first delivery,
a rollback that plants state no forward run produces).
"""

import importlib
from dataclasses import replace

from revactor import (
    FName, RoundRobin, check_fifo, check_loop, check_soundness, digest,
    gen_module, parse_module, pretty_module, run_policy,
)
from revactor.syntax import Lit

# The package re-exports rollback() and explore(), shadowing the
# submodule names, so the modules are fetched explicitly.
rollback_mod = importlib.import_module("revactor.rollback")
reversible_mod = importlib.import_module("revactor.reversible")
checks_mod = importlib.import_module("revactor.checks")

MAIN = FName("main", 0)

# Two sends to a sink that never consumes them: the sink's mailbox
# holds both messages, which is where delivery-order corruption shows.
TWO_SENDS = parse_module("""
module two_sends =
  main/0 = fun () ->
    let P = spawn(sink/0, []) in
    let _ = P ! a in
    let _ = P ! b in
    done,
  sink/0 = fun () -> receive never -> ok end
""")

ONE_CHECKPOINT = parse_module("""
module one_checkpoint =
  main/0 = fun () -> let _ = check in let X = 1 + 2 in X
""")


# ---------------------------------------------------------------------------
# Exact undo/redo of every step
# ---------------------------------------------------------------------------


def test_loop_holds_on_bundled_programs(racing_echo, clientserver, clientserver_check):
    for mod in (racing_echo, clientserver, clientserver_check):
        report = check_loop(mod, MAIN, runs=4, max_steps=40, seed=3)
        assert report["violations"] == []
        assert report["checked_states"] > 0


def test_loop_report_shape(clientserver):
    report = check_loop(clientserver, MAIN, runs=2, max_steps=20, seed=0)
    assert set(report) == {
        "property", "runs", "checked_states", "violations", "truncated",
        "elapsed_s",
    }
    assert report["property"] == "loop"
    assert report["runs"] == 2
    assert report["truncated"] is False
    assert isinstance(report["elapsed_s"], float)


def test_loop_deterministic_given_seed(racing_echo):
    a = check_loop(racing_echo, MAIN, runs=3, max_steps=30, seed=7)
    b = check_loop(racing_echo, MAIN, runs=3, max_steps=30, seed=7)
    a.pop("elapsed_s")
    b.pop("elapsed_s")
    assert a == b


def test_loop_flags_wrong_undo_of_delivery(monkeypatch):
    # Undoing a delivery must remove the delivered message (the mailbox
    # tail); this mutant removes the oldest one instead.  The mistake
    # is invisible on one-message mailboxes, so the probe program parks
    # two messages at the sink.
    monkeypatch.setattr(rollback_mod, "pop_delivered_message",
                        lambda mailbox, msg: mailbox[1:])
    report = check_loop(TWO_SENDS, MAIN, runs=6, max_steps=40, seed=0)
    assert report["violations"]
    first = report["violations"][0]
    assert "mailboxes differ" in first["diff"]
    assert {"run", "step", "choice_seq", "diff"} <= set(first)


# ---------------------------------------------------------------------------
# FIFO delivery per ordered process pair
# ---------------------------------------------------------------------------


def test_fifo_holds_on_bundled_programs(racing_echo, clientserver, clientserver_check):
    for mod in (racing_echo, clientserver, clientserver_check):
        report = check_fifo(mod, MAIN, runs=30, max_steps=60, seed=5)
        assert report["violations"] == []
        assert report["checked_states"] > 0  # counts deliveries


def test_fifo_report_shape(clientserver):
    report = check_fifo(clientserver, MAIN, runs=2, max_steps=20, seed=0)
    assert set(report) == {
        "property", "runs", "checked_states", "violations", "truncated",
        "elapsed_s",
    }
    assert report["property"] == "fifo"


def test_fifo_flags_newest_first_delivery(monkeypatch):
    def pop_newest(gamma, key):
        queue = gamma[key]
        rest = dict(gamma)
        if len(queue) == 1:
            del rest[key]
        else:
            rest[key] = queue[:-1]
        return queue[-1], rest

    monkeypatch.setattr(reversible_mod, "gamma_pop_oldest", pop_newest)
    report = check_fifo(TWO_SENDS, MAIN, runs=40, max_steps=40, seed=2)
    assert report["violations"]
    # Runs where both sends precede the first delivery see the order
    # reversed; runs that interleave them deliver single-message queues
    # and pass, so only some runs appear here.
    for violation in report["violations"]:
        assert violation["delivered"] != violation["sent"][:len(violation["delivered"])]
    reversed_pair = [v for v in report["violations"]
                     if v["delivered"] == list(reversed(v["sent"]))]
    assert reversed_pair


# ---------------------------------------------------------------------------
# Rollback soundness
# ---------------------------------------------------------------------------


def test_soundness_holds_with_rollbacks(clientserver_check):
    report = check_soundness(clientserver_check, MAIN, max_depth=8,
                             max_rollbacks=1, max_states=2_000)
    assert report["violations"] == []
    assert report["checked_states"] > 0
    assert set(report) == {
        "property", "checked_states", "forward_states", "violations",
        "truncated", "elapsed_s",
    }
    assert report["property"] == "soundness"


def test_soundness_reports_truncation(clientserver):
    report = check_soundness(clientserver, MAIN, max_depth=4,
                             max_rollbacks=0, max_states=400)
    assert report["truncated"] is True
    assert report["violations"] == []


def test_soundness_flags_corrupted_rollback(monkeypatch):
    clean = check_soundness(ONE_CHECKPOINT, MAIN, max_depth=12,
                            max_rollbacks=1, max_states=500)
    assert clean["violations"] == []
    assert clean["truncated"] is False

    real = rollback_mod.rollback

    def corrupt(mod, sys_, pid, ckpt):
        rolled, applied = real(mod, sys_, pid, ckpt)
        proc = rolled.pool[pid]
        bad = replace(proc, env={**proc.env, "Zz": Lit(4242)})
        pool = dict(rolled.pool)
        pool[pid] = bad
        return replace(rolled, pool=pool), applied

    monkeypatch.setattr(checks_mod, "rollback", corrupt)
    report = check_soundness(ONE_CHECKPOINT, MAIN, max_depth=12,
                             max_rollbacks=1, max_states=500)
    assert report["violations"]
    first = report["violations"][0]
    assert "not forward-reachable" in first["diff"]
    assert any(step.startswith("rollback") for step in first["choice_seq"])


# ---------------------------------------------------------------------------
# Program generator
# ---------------------------------------------------------------------------


def test_same_seed_same_module():
    assert gen_module(5) == gen_module(5)
    assert pretty_module(gen_module(5)) == pretty_module(gen_module(5))


def test_different_seeds_differ():
    base = pretty_module(gen_module(0))
    assert any(pretty_module(gen_module(seed)) != base for seed in range(1, 6))


def test_generated_programs_have_an_entry_point():
    for seed in range(20):
        mod = gen_module(seed)
        assert mod.name == f"gen{seed}"
        assert any(fd.fname == MAIN for fd in mod.funs)


def test_generated_programs_reparse():
    # Reparsing renumbers anonymous binders, so structural equality is
    # too strong; the printed form must be a fixpoint and the reparsed
    # module must behave identically.
    for seed in range(20):
        mod = gen_module(seed)
        src = pretty_module(mod)
        back = parse_module(src)
        assert pretty_module(back) == src
        a = run_policy(mod, MAIN, RoundRobin(), max_steps=60)
        b = run_policy(back, MAIN, RoundRobin(), max_steps=60)
        assert [c for c, _, _ in a.steps] == [c for c, _, _ in b.steps]
        assert digest(a.final, include_history=True) == \
            digest(b.final, include_history=True)


def test_generated_programs_stay_within_five_processes():
    for seed in range(30):
        mod = gen_module(seed)
        run = run_policy(mod, MAIN, RoundRobin(), max_steps=80)
        assert len(run.final.pool) <= 5
