"""Shared fixtures and the acceptance-results terminal summary."""

from __future__ import annotations

from pathlib import Path

import pytest

from revactor.syntax import FName, Module, parse_module

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"
MAIN = FName("main", 0)


def load_program(name: str) -> Module:
    return parse_module((PROGRAMS / name).read_text())


@pytest.fixture(scope="session")
def racing_echo() -> Module:
    return load_program("racing_echo.rl")


@pytest.fixture(scope="session")
def clientserver() -> Module:
    return load_program("clientserver.rl")


@pytest.fixture(scope="session")
def clientserver_check() -> Module:
    return load_program("clientserver_check.rl")


# One line per acceptance criterion in the terminal summary, pass or fail.

CRITERIA = {
    "test_c1_outcome_set": "exhaustive exploration yields exactly the two racing outcomes",
    "test_c2_golden_forward_trace": "scripted client-server run reproduces every derivation row",
    "test_c3_golden_reversible_rollback": "reversible trace + rollback ends in the pre-check state",
    "test_c4_every_step_reverses": "loop property: zero counterexamples over bundled + generated programs",
    "test_c5_rollback_soundness": "soundness property: rolled-back states are forward-reachable",
    "test_c6_fifo_per_pair": "FIFO per ordered pid pair over 10^4 random runs",
    "test_c7_replay_determinism": "recorded scripts replay to byte-identical canonical snapshots",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            name = getattr(report, "nodeid", "").rsplit("::", 1)[-1]
            if name in CRITERIA:
                verdict = "PASS" if status == "passed" else "FAIL"
                lines.append((name, f"{verdict} {name}: {CRITERIA[name]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
