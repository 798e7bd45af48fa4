#!/usr/bin/env python3
"""Run the semantic property checkers across a whole program suite.

The suite is every bundled program plus a batch of generated ones.  One
NDJSON line is printed per (program, property) pair, followed by a
plain-text summary.  Exit code 2 if any checker reported a violation.

Typical invocations:

    python3 scripts/run_checks.py
    python3 scripts/run_checks.py --generated 500 --properties loop fifo
    python3 scripts/run_checks.py --soundness-depth 20 --runs 50
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from revactor import (
    FName, check_fifo, check_loop, check_soundness, gen_module, parse_module,
)

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"
MAIN = FName("main", 0)


@dataclass(frozen=True)
class SuiteConfig:
    properties: tuple[str, ...] = ("loop", "soundness", "fifo")
    generated: int = 200
    gen_seed0: int = 0
    runs: int = 20
    max_steps: int = 50
    seed: int = 0
    soundness_depth: int = 30
    soundness_rollbacks: int = 2
    soundness_states: int = 5_000
    # soundness explores whole state spaces; keep it to the bundled
    # programs unless explicitly asked for
    soundness_on_generated: bool = False


def iter_suite(cfg: SuiteConfig):
    for path in sorted(PROGRAMS.glob("*.rl")):
        yield path.stem, parse_module(path.read_text()), True
    for seed in range(cfg.gen_seed0, cfg.gen_seed0 + cfg.generated):
        yield f"gen{seed}", gen_module(seed), False


def run_one(cfg: SuiteConfig, prop: str, mod, bundled: bool):
    if prop == "loop":
        return check_loop(mod, MAIN, runs=cfg.runs, max_steps=cfg.max_steps,
                          seed=cfg.seed)
    if prop == "fifo":
        return check_fifo(mod, MAIN, runs=cfg.runs, max_steps=cfg.max_steps,
                          seed=cfg.seed)
    if prop == "soundness":
        if not bundled and not cfg.soundness_on_generated:
            return None
        return check_soundness(mod, MAIN, max_depth=cfg.soundness_depth,
                               max_rollbacks=cfg.soundness_rollbacks,
                               max_states=cfg.soundness_states)
    raise ValueError(f"unknown property {prop!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--properties", nargs="+", default=["loop", "soundness", "fifo"],
                        choices=("loop", "soundness", "fifo"))
    parser.add_argument("--generated", type=int, default=200,
                        help="number of generated programs, default 200")
    parser.add_argument("--gen-seed0", type=int, default=0)
    parser.add_argument("--runs", type=int, default=20)
    parser.add_argument("--max-steps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--soundness-depth", type=int, default=30)
    parser.add_argument("--soundness-rollbacks", type=int, default=2)
    parser.add_argument("--soundness-states", type=int, default=5_000)
    parser.add_argument("--soundness-on-generated", action="store_true")
    args = parser.parse_args(argv)
    cfg = SuiteConfig(
        properties=tuple(args.properties),
        generated=args.generated,
        gen_seed0=args.gen_seed0,
        runs=args.runs,
        max_steps=args.max_steps,
        seed=args.seed,
        soundness_depth=args.soundness_depth,
        soundness_rollbacks=args.soundness_rollbacks,
        soundness_states=args.soundness_states,
        soundness_on_generated=args.soundness_on_generated,
    )
    print(json.dumps({"config": asdict(cfg)}))

    t0 = time.monotonic()
    totals = {prop: 0 for prop in cfg.properties}
    failures = 0
    truncations = 0
    for name, mod, bundled in iter_suite(cfg):
        for prop in cfg.properties:
            report = run_one(cfg, prop, mod, bundled)
            if report is None:
                continue
            totals[prop] += 1
            if report["truncated"]:
                truncations += 1
            bad = len(report["violations"])
            failures += bad
            line = {"program": name, **report}
            if bad == 0:
                # keep passing lines short; violations print in full
                line["violations"] = 0
            print(json.dumps(line))

    elapsed = time.monotonic() - t0
    counts = ", ".join(f"{prop}: {n} programs" for prop, n in totals.items())
    print(f"# {counts}; {failures} violations; "
          f"{truncations} truncated reports; {elapsed:.1f}s", file=sys.stderr)
    return 2 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
