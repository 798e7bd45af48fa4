#!/usr/bin/env python3
"""Walk the checkpointed client-server exchange forward, then back.

Runs the bundled clientserver_check program to quiescence under a fixed
policy, printing every step, then rolls the checkpointed client back to
its checkpoint.  The rollback cascades causally: undoing the client's
request also undoes the server's receipt of it and everything the
server did afterwards, possibly including its service of the other
client.  The resulting state is therefore usually NOT one the recorded
run passed through; the script verifies instead that it is a state
forward execution could have reached, by exhaustive exploration.

    python3 scripts/replay_walkthrough.py
    python3 scripts/replay_walkthrough.py --policy random --seed 4
"""

from __future__ import annotations

import argparse

from revactor import (
    FName, RandomPolicy, RoundRobin, digest, explore, parse_module,
    request_rollback, rollback_drive,
)
from revactor.explore import forward_rule_name
from revactor.reversible import checkpoints_of, enabled_forward, fstep, initial_rsystem
from revactor.snapshots import pid_str
from revactor.syntax import Pid, pretty_expr

from pathlib import Path

PROGRAM = Path(__file__).resolve().parent.parent / "programs" / "clientserver_check.rl"
MAIN = FName("main", 0)


def describe(sys_) -> str:
    parts = []
    for pid in sorted(sys_.pool, key=lambda p: p.index):
        proc = sys_.pool[pid]
        text = pretty_expr(proc.expr)
        if len(text) > 48:
            text = text[:45] + "..."
        parts.append(f"{pid_str(pid)}: {text}")
    return " | ".join(parts)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--policy", choices=("roundrobin", "random"),
                        default="roundrobin")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-steps", type=int, default=200)
    args = parser.parse_args(argv)
    policy = RoundRobin() if args.policy == "roundrobin" else RandomPolicy(args.seed)

    mod = parse_module(PROGRAM.read_text())
    sys_ = initial_rsystem(mod, MAIN)

    print("== forward ==")
    for step in range(args.max_steps):
        enabled = enabled_forward(mod, sys_)
        if not enabled:
            break
        choice = policy.choose(enabled, sys_)
        if choice is None:
            break
        nxt = fstep(mod, sys_, choice)
        rule = forward_rule_name(sys_, nxt, choice)
        print(f"{step:3} {rule:8} {describe(nxt)}")
        sys_ = nxt

    client = Pid(0)
    ckpts = checkpoints_of(sys_.pool[client])
    if not ckpts:
        print("no checkpoints recorded on p0; nothing to roll back")
        return 1
    target = ckpts[-1]
    print(f"\n== rollback p0 to checkpoint #{target} ==")
    marked = request_rollback(sys_, client, target)
    rolled, applied = rollback_drive(mod, marked)
    for pid, rule in applied:
        print(f"    {pid_str(pid)}: {rule}")
    print(f"\nrolled-back state: {describe(rolled)}")

    reachable = explore(mod, MAIN, max_depth=120, max_states=100_000)
    if reachable.truncated:
        print("exploration truncated; reachability not decided")
        return 1
    if digest(rolled, include_history=False) not in reachable.nodes:
        print("ERROR: rolled-back state is not forward-reachable")
        return 1
    print(f"forward-reachable: one of the {len(reachable.nodes)} states "
          "some schedule can produce")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
