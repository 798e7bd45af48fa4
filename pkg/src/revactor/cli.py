"""Command-line interface.

Subcommands:

* run      execute a program under a scheduling policy, emitting one
           NDJSON trace event per step and a final summary line
* explore  breadth-first exploration of all schedules with limits,
           reporting terminal states and optionally a DOT graph
* check    run a property checker (loop, soundness, fifo) and print its
           JSON report; exit code 2 signals violations
* debug    interactive time-travel debugger on a terminal
* serve    HTTP debug service exposing the same stepping operations

Exit codes: 0 success, 1 usage/parse/runtime errors, 2 property
violations or stuck rollback.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .canon import digest
from .checks import check_fifo, check_loop, check_soundness
from .explore import (
    RandomPolicy, RoundRobin, ScriptPolicy, explore, forward_rule_name,
    run_policy, terminal_values, to_dot,
)
from .reversible import (
    RSystem, checkpoints_of, enabled_forward, fstep, initial_rsystem,
    marked_pids,
)
from .rollback import StuckRollback, bstep, peek_backward_rule, request_rollback, rollback_drive
from .snapshots import (
    backward_trace_event, choice_to_json, forward_trace_event, parse_pid,
    pid_str, script_from_json, state_snapshot,
)
from .syntax import FName, ParseError, parse_module, pretty_expr
from .systems import ChoiceNotEnabled, Deliver, Local, SemanticsError
from .exprstep import RunError


def _parse_fname(text: str) -> FName:
    name, _, arity = text.partition("/")
    if not arity.isdigit() or not name:
        raise argparse.ArgumentTypeError(f"expected atom/arity, got {text!r}")
    return FName(name, int(arity))


def _load_module(path: str):
    try:
        return parse_module(Path(path).read_text())
    except OSError as err:
        print(f"error: cannot read {path}: {err}", file=sys.stderr)
        raise SystemExit(1)
    except ParseError as err:
        print(f"error: {path}: {err}", file=sys.stderr)
        raise SystemExit(1)


def _make_policy(args) -> object:
    if args.policy == "roundrobin":
        return RoundRobin()
    if args.policy == "random":
        return RandomPolicy(args.seed)
    if args.policy == "script":
        if not args.script:
            print("error: --policy script needs --script FILE", file=sys.stderr)
            raise SystemExit(1)
        return ScriptPolicy(script_from_json(Path(args.script).read_text()))
    raise SystemExit(1)


def cmd_run(args) -> int:
    mod = _load_module(args.file)
    policy = _make_policy(args)
    sys_ = initial_rsystem(mod, args.entry)
    for n in range(args.max_steps):
        enabled = enabled_forward(mod, sys_)
        if not enabled:
            break
        choice = policy.choose(enabled, sys_)
        if choice is None:
            break
        nxt = fstep(mod, sys_, choice)
        rule = forward_rule_name(sys_, nxt, choice)
        event = forward_trace_event(n, sys_, nxt, choice, rule)
        event["choice"] = choice_to_json(choice)
        print(json.dumps(event))
        sys_ = nxt
    summary: dict = {"final": state_snapshot(sys_, include_history=args.dump_history)}
    if args.final_values:
        summary["final_values"] = {
            pid_str(p): pretty_expr(proc.expr)
            for p, proc in sorted(sys_.pool.items(), key=lambda kv: kv[0].index)
        }
    print(json.dumps(summary))
    return 0


def cmd_explore(args) -> int:
    mod = _load_module(args.file)
    graph = explore(mod, args.entry, max_depth=args.max_depth, max_states=args.max_states)
    report = {"stats": graph.stats(), "root": graph.root}
    if args.final_values:
        values: dict[str, list[str]] = {}
        for key in graph.terminals:
            state = graph.nodes[key]
            for pid in sorted(state.pool, key=lambda p: p.index):
                proc = state.pool[pid]
                values.setdefault(pid_str(pid), [])
                text = pretty_expr(proc.expr)
                if text not in values[pid_str(pid)]:
                    values[pid_str(pid)].append(text)
        report["final_values"] = {k: sorted(v) for k, v in values.items()}
    print(json.dumps(report, indent=2))
    if args.dot:
        Path(args.dot).write_text(to_dot(graph))
    return 0


def cmd_check(args) -> int:
    mod = _load_module(args.file)
    if args.property == "loop":
        report = check_loop(mod, args.entry, runs=args.runs,
                            max_steps=args.max_steps, seed=args.seed)
    elif args.property == "soundness":
        report = check_soundness(mod, args.entry, max_depth=args.max_depth,
                                 max_states=args.max_states,
                                 max_rollbacks=args.max_rollbacks)
    else:
        report = check_fifo(mod, args.entry, runs=args.runs,
                            max_steps=args.max_steps, seed=args.seed)
    print(json.dumps(report, indent=2))
    return 2 if report["violations"] else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(persist_dir=args.persist)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Interactive debugger
# ---------------------------------------------------------------------------

_DEBUG_HELP = """\
commands:
  state                 show all processes, mailboxes and in-transit messages
  choices               list enabled forward choices and backward rules
  step [N]              take forward choice N (default 0)
  back PID              one backward rule application on a marked process
  rollback PID CKPT     mark PID to rewind to checkpoint CKPT and drive it
  drive                 drive all marked processes until unmarked
  history PID           show the recorded history of PID, newest first
  quit                  leave the debugger
"""


def _print_state(sys_: RSystem) -> None:
    snap = state_snapshot(sys_)
    for proc in snap["processes"]:
        mark = f" mark={proc['mark']}" if proc["mark"] else ""
        fail = f" FAILED: {proc['failure']}" if proc["failure"] else ""
        print(f"{proc['pid']}: {proc['expr']}{mark}{fail}")
        if proc["env"]:
            print(f"   env: {proc['env']}")
        if proc["mailbox"]:
            print(f"   mailbox: {proc['mailbox']}")
        if proc["checkpoints"]:
            print(f"   checkpoints: {proc['checkpoints']}")
    for lane in snap["gamma"]:
        print(f"gamma {lane['from']}->{lane['to']}: {lane['messages']}")


def cmd_debug(args) -> int:
    mod = _load_module(args.file)
    sys_ = initial_rsystem(mod, args.entry)
    print(f"debugging {args.file} from {args.entry}; 'help' lists commands")
    while True:
        try:
            line = input("(revactor) ").strip()
        except EOFError:
            return 0
        if not line:
            continue
        cmd, *rest = line.split()
        try:
            if cmd == "quit" or cmd == "q":
                return 0
            elif cmd == "help":
                print(_DEBUG_HELP, end="")
            elif cmd == "state":
                _print_state(sys_)
            elif cmd == "choices":
                for i, choice in enumerate(enabled_forward(mod, sys_)):
                    print(f"  [{i}] {choice_to_json(choice)}")
                for pid in marked_pids(sys_):
                    print(f"  back {pid_str(pid)}: {peek_backward_rule(mod, sys_, pid)}")
            elif cmd == "step":
                enabled = enabled_forward(mod, sys_)
                if not enabled:
                    print("no forward choice enabled")
                    continue
                index = int(rest[0]) if rest else 0
                choice = enabled[index]
                nxt = fstep(mod, sys_, choice)
                print(f"applied {forward_rule_name(sys_, nxt, choice)} "
                      f"{choice_to_json(choice)}")
                sys_ = nxt
            elif cmd == "back":
                sys_, rule = bstep(mod, sys_, parse_pid(rest[0]))
                print(f"applied {rule}")
            elif cmd == "rollback":
                sys_ = request_rollback(sys_, parse_pid(rest[0]), int(rest[1]))
                sys_, applied = rollback_drive(mod, sys_)
                for pid, rule in applied:
                    print(f"  {pid_str(pid)}: {rule}")
            elif cmd == "drive":
                sys_, applied = rollback_drive(mod, sys_)
                for pid, rule in applied:
                    print(f"  {pid_str(pid)}: {rule}")
            elif cmd == "history":
                snap = state_snapshot(sys_, include_history=True)
                proc = next((p for p in snap["processes"] if p["pid"] == rest[0]), None)
                if proc is None:
                    print(f"no process {rest[0]}")
                else:
                    for ev in proc["history"]:
                        print(f"  {ev}")
            else:
                print(f"unknown command {cmd!r}; 'help' lists commands")
        except (IndexError, ValueError) as err:
            print(f"usage error: {err}")
        except (ChoiceNotEnabled, SemanticsError, StuckRollback, RunError) as err:
            print(f"error: {err}")


def main(argv=None) -> int:
    top = argparse.ArgumentParser(prog="revactor", description=__doc__.split("\n")[0])
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, with_entry=True):
        p.add_argument("file", help="program file (.rl)")
        if with_entry:
            p.add_argument("--entry", type=_parse_fname, default=FName("main", 0),
                           help="entry function, default main/0")

    p_run = sub.add_parser("run", help="run under a scheduling policy")
    common(p_run)
    p_run.add_argument("--policy", choices=("roundrobin", "random", "script"),
                       default="roundrobin")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--script", help="JSON choice script (for --policy script)")
    p_run.add_argument("--max-steps", type=int, default=10_000)
    p_run.add_argument("--dump-history", action="store_true",
                       help="include full histories in the final snapshot")
    p_run.add_argument("--final-values", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_exp = sub.add_parser("explore", help="explore all schedules")
    common(p_exp)
    p_exp.add_argument("--max-depth", type=int, default=60)
    p_exp.add_argument("--max-states", type=int, default=100_000)
    p_exp.add_argument("--final-values", action="store_true")
    p_exp.add_argument("--dot", help="write a DOT rendering of the state graph")
    p_exp.set_defaults(fn=cmd_explore)

    p_chk = sub.add_parser("check", help="check a semantic property")
    common(p_chk)
    p_chk.add_argument("--property", choices=("loop", "soundness", "fifo"),
                       required=True)
    p_chk.add_argument("--runs", type=int, default=20)
    p_chk.add_argument("--max-steps", type=int, default=50)
    p_chk.add_argument("--max-depth", type=int, default=30)
    p_chk.add_argument("--max-states", type=int, default=5_000)
    p_chk.add_argument("--max-rollbacks", type=int, default=2)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.set_defaults(fn=cmd_check)

    p_dbg = sub.add_parser("debug", help="interactive time-travel debugger")
    common(p_dbg)
    p_dbg.set_defaults(fn=cmd_debug)

    p_srv = sub.add_parser("serve", help="HTTP debug service")
    p_srv.add_argument("--port", type=int, default=8790)
    p_srv.add_argument("--persist", help="directory for session persistence")
    p_srv.set_defaults(fn=cmd_serve)

    args = top.parse_args(argv)
    try:
        return args.fn(args)
    except StuckRollback as err:
        print(f"error: stuck rollback: {err}", file=sys.stderr)
        return 2
    except (ChoiceNotEnabled, RunError, ParseError, SemanticsError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
