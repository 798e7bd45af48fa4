"""Scheduling policies, guided runs, and exhaustive state exploration.

A policy picks one of the enabled choices at each step; the runner
threads it through the semantics and records a trace.  The explorer
instead follows every enabled choice breadth-first, deduplicating
states by their canonical digest, and returns a state graph with
terminal states and a truncation flag when limits cut the search short.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .canon import digest
from .reversible import (
    CheckEv, DeliverEv, RecEv, RSystem, SelfEv, SendEv, SpawnEv, TauEv,
    initial_rsystem,
)
from .syntax import FName, Module, is_value
from .systems import (
    Deliver, Local, StepChoice, System, enabled_standard, initial_system,
    step_system,
)
from .reversible import enabled_forward, fstep

AnySystem = Union[System, RSystem]


class ScriptError(Exception):
    """A scripted choice does not match any enabled choice."""


class RoundRobin:
    """Cycle deterministically through the enabled choices."""

    def __init__(self) -> None:
        self._turn = -1

    def choose(self, enabled: list[StepChoice], sys_: AnySystem) -> Optional[StepChoice]:
        self._turn += 1
        return enabled[self._turn % len(enabled)]


class RandomPolicy:
    """Uniform choice with a seeded generator; replayable."""

    def __init__(self, seed: int) -> None:
        self._rng = random.Random(seed)

    def choose(self, enabled: list[StepChoice], sys_: AnySystem) -> Optional[StepChoice]:
        return self._rng.choice(enabled)


class ScriptPolicy:
    """Replay a fixed choice sequence; stop when it runs out.

    A scripted choice that is not currently enabled raises ScriptError:
    scripts are replay artifacts and silence would hide divergence.
    """

    def __init__(self, choices: list[StepChoice]) -> None:
        self._choices = list(choices)
        self._i = 0

    def choose(self, enabled: list[StepChoice], sys_: AnySystem) -> Optional[StepChoice]:
        if self._i >= len(self._choices):
            return None
        choice = self._choices[self._i]
        self._i += 1
        if choice not in enabled:
            raise ScriptError(f"scripted choice {choice} not enabled at step {self._i - 1}")
        return choice


def forward_rule_name(before: AnySystem, after: AnySystem, choice: StepChoice) -> str:
    """Name of the forward rule a step applied, for traces.

    Derived from the acting process's newest history event when
    available, so it works for the instrumented semantics; a step that
    froze the process is reported as Fail.
    """
    if isinstance(choice, Deliver):
        return "Sched"
    pid = choice.pid
    pa = after.pool[pid]
    pb = before.pool[pid]
    if pa.failure is not None and pb.failure is None:
        return "Fail"
    ev = getattr(pa, "hist", None)
    if ev is not None:
        top = ev[0]
        return {
            TauEv: "Exp", SelfEv: "Self", CheckEv: "Check", RecEv: "Receive",
            SendEv: "Send", SpawnEv: "Spawn", DeliverEv: "Sched",
        }[type(top)]
    return "Exp"


@dataclass
class RunResult:
    final: AnySystem
    steps: list[tuple[StepChoice, str, AnySystem]]  # (choice, rule, state after)
    quiescent: bool  # no choice was enabled when the run stopped


def run_policy(
    mod: Module,
    entry: FName,
    policy,
    max_steps: int = 10_000,
    reversible: bool = True,
    system: Optional[AnySystem] = None,
) -> RunResult:
    """Drive a fresh (or given) system under a policy."""
    if system is not None:
        sys_ = system
    elif reversible:
        sys_ = initial_rsystem(mod, entry)
    else:
        sys_ = initial_system(mod, entry)
    enabled_fn = enabled_forward if reversible else enabled_standard
    step_fn = fstep if reversible else step_system
    steps: list[tuple[StepChoice, str, AnySystem]] = []
    for _ in range(max_steps):
        enabled = enabled_fn(mod, sys_)
        if not enabled:
            return RunResult(sys_, steps, quiescent=True)
        choice = policy.choose(enabled, sys_)
        if choice is None:
            return RunResult(sys_, steps, quiescent=False)
        nxt = step_fn(mod, sys_, choice)
        steps.append((choice, forward_rule_name(sys_, nxt, choice), nxt))
        sys_ = nxt
    return RunResult(sys_, steps, quiescent=False)


# ---------------------------------------------------------------------------
# Exhaustive exploration
# ---------------------------------------------------------------------------


@dataclass
class StateGraph:
    root: str
    nodes: dict[str, AnySystem] = field(default_factory=dict)
    depth: dict[str, int] = field(default_factory=dict)
    edges: list[tuple[str, StepChoice, str]] = field(default_factory=list)
    terminals: set[str] = field(default_factory=set)
    truncated: bool = False

    def stats(self) -> dict:
        return {
            "states": len(self.nodes),
            "edges": len(self.edges),
            "terminals": len(self.terminals),
            "max_depth": max(self.depth.values(), default=0),
            "truncated": self.truncated,
        }


def explore(
    mod: Module,
    entry: Optional[FName] = None,
    *,
    system: Optional[AnySystem] = None,
    reversible: bool = False,
    max_depth: int = 60,
    max_states: int = 100_000,
) -> StateGraph:
    """Breadth-first exploration of every scheduling choice.

    States are identified by canonical digest; for the plain semantics
    tags and histories are ignored, for the instrumented semantics they
    are part of the identity.  Terminal states have no enabled choice.
    The truncated flag is set when depth or state limits cut off
    unexplored successors.
    """
    if system is None:
        if entry is None:
            raise ValueError("explore needs an entry function or a system")
        system = initial_rsystem(mod, entry) if reversible else initial_system(mod, entry)
    enabled_fn = enabled_forward if reversible else enabled_standard
    step_fn = fstep if reversible else step_system

    root_key = digest(system, include_history=reversible)
    graph = StateGraph(root=root_key)
    graph.nodes[root_key] = system
    graph.depth[root_key] = 0
    frontier = [(root_key, system)]
    while frontier:
        next_frontier: list[tuple[str, AnySystem]] = []
        for key, state in frontier:
            enabled = enabled_fn(mod, state)
            if not enabled:
                graph.terminals.add(key)
                continue
            if graph.depth[key] >= max_depth:
                graph.truncated = True
                continue
            for choice in enabled:
                succ = step_fn(mod, state, choice)
                skey = digest(succ, include_history=reversible)
                if skey not in graph.nodes:
                    if len(graph.nodes) >= max_states:
                        graph.truncated = True
                        continue
                    graph.nodes[skey] = succ
                    graph.depth[skey] = graph.depth[key] + 1
                    next_frontier.append((skey, succ))
                graph.edges.append((key, choice, skey))
        frontier = next_frontier
    return graph


def terminal_values(graph: StateGraph, pid) -> set:
    """Final expression values of one process across terminal states.

    Only terminal states where that process has finished (its
    expression is a value) contribute.
    """
    out = set()
    for key in graph.terminals:
        state = graph.nodes[key]
        proc = state.pool.get(pid)
        if proc is not None and proc.failure is None and is_value(proc.expr):
            out.add(proc.expr)
    return out


def to_dot(graph: StateGraph) -> str:
    """Graphviz rendering of a (small) state graph."""
    lines = ["digraph states {", "  rankdir=LR;", "  node [shape=box, fontsize=9];"]
    short = {key: f"s{i}" for i, key in enumerate(graph.nodes)}
    for key in graph.nodes:
        attrs = [f'label="{short[key]}\\n{key[:8]}"']
        if key == graph.root:
            attrs.append("penwidth=2")
        if key in graph.terminals:
            attrs.append('style=filled fillcolor="#e8f0fe"')
        lines.append(f'  {short[key]} [{" ".join(attrs)}];')
    for src, choice, dst in graph.edges:
        if isinstance(choice, Local):
            label = str(choice.pid)
        else:
            label = f"{choice.sender}→{choice.receiver}"
        lines.append(f'  {short[src]} -> {short[dst]} [label="{label}", fontsize=8];')
    lines.append("}")
    return "\n".join(lines)
