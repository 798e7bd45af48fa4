"""Seeded generator of small well-formed actor programs.

The generator produces modules with a nullary entry function that
spawns up to four workers (five processes total), exchanges typed
messages with them, and sprinkles in checkpoints, arithmetic, case
analysis and bounded recursion.  Programs terminate or suspend within a
few dozen steps; a small fraction deliberately contains a type fault so
downstream checkers also exercise the freeze-on-fault path.

Given the same seed the generator returns the same module, so failures
in the randomized checkers are replayable from the seed alone.
"""

from __future__ import annotations

import random

from .syntax import (
    Apply, Call, Case, CheckCall, Clause, Expr, FName, FunDef, Let, Lit,
    Module, Receive, SelfCall, Send, Spawn, Tup, Var,
)

ENTRY = FName("main", 0)

_ATOMS = ("ok", "go", "ack", "ping", "pong", "stop", "data")


class _Gen:
    def __init__(self, seed: int) -> None:
        self.rng = random.Random(seed)
        self.fresh = 0

    def var(self, prefix: str = "X") -> str:
        self.fresh += 1
        return f"{prefix}{self.fresh}"

    def atom(self) -> Lit:
        return Lit(self.rng.choice(_ATOMS))

    def int_lit(self) -> Lit:
        return Lit(self.rng.randint(0, 9))


def _pick_var(scope: dict[str, str], rng: random.Random, kind: str) -> str | None:
    names = [n for n, k in scope.items() if k == kind]
    return rng.choice(names) if names else None


def _int_expr(g: _Gen, scope: dict[str, str]) -> Expr:
    name = _pick_var(scope, g.rng, "int")
    if name is not None and g.rng.random() < 0.6:
        base: Expr = Var(name)
    else:
        base = g.int_lit()
    if g.rng.random() < 0.4:
        op = g.rng.choice(("+", "-", "*"))
        return Call(op, (base, g.int_lit()))
    return base


def _payload(g: _Gen, scope: dict[str, str], reply_to: Expr) -> Expr:
    roll = g.rng.random()
    if roll < 0.5:
        return Tup((reply_to, _int_expr(g, scope)))
    if roll < 0.75:
        return g.atom()
    return Tup((g.atom(), _int_expr(g, scope)))


def _gen_worker(g: _Gen, fname: FName, workers: list[FName]) -> FunDef:
    kind = g.rng.choice(("echoer", "counter", "pure"))
    if kind == "echoer":
        # Receive {From, V}, reply, maybe receive again.
        body: Expr = Receive((
            Clause(
                Tup((Var("From"), Var("V"))),
                Lit("true"),
                Let(g.var("_@"), Send(Var("From"), Tup((Lit("ack"), Var("V")))),
                    Lit("done")),
            ),
            Clause(Var("Other"), Lit("true"), Var("Other")),
        ))
        if g.rng.random() < 0.4:
            body = Let(g.var("_@"), CheckCall(), body)
        return FunDef(fname, (), body)
    if kind == "counter":
        # Count down, optionally notifying a peer each round.
        n = Var("N")
        notify = Var("Peer")
        step_body: Expr = Apply(fname, (Call("-", (n, Lit(1))), notify))
        if g.rng.random() < 0.6:
            step_body = Let(g.var("_@"), Send(notify, Tup((Lit("tick"), n))), step_body)
        body = Case(n, (
            Clause(Lit(0), Lit("true"), Lit("done")),
            Clause(Var("M"), Call(">", (Var("M"), Lit(0))), step_body),
            Clause(Var("_@na"), Lit("true"), Lit("negative")),
        ))
        return FunDef(fname, ("N", "Peer"), body)
    # pure: arithmetic on the parameter, produce a tuple
    body = Let("R", Call("*", (Var("N"), Call("+", (Var("N"), Lit(1))))),
               Tup((Lit("sq"), Var("R"))))
    if g.rng.random() < 0.3:
        body = Let(g.var("_@"), CheckCall(), body)
    return FunDef(fname, ("N",), body)


def _spawn_args(g: _Gen, fd: FunDef, scope: dict[str, str]) -> tuple[Expr, ...]:
    args: list[Expr] = []
    for p in fd.params:
        if p == "Peer":
            pid = _pick_var(scope, g.rng, "pid")
            args.append(Var(pid) if pid and g.rng.random() < 0.7 else SelfCall())
        else:
            args.append(Lit(g.rng.randint(0, 3)))
    return tuple(args)


def gen_module(seed: int) -> Module:
    """A deterministic small program for the given seed."""
    g = _Gen(seed)
    n_workers = g.rng.randint(1, 3)
    workers = [FName(f"worker{i}", 0) for i in range(1, n_workers + 1)]
    fundefs: list[FunDef] = []
    for w in workers:
        fundefs.append(_gen_worker(g, w, workers))
    # Patch arities: worker bodies above decide their parameter lists.
    fixed: list[FunDef] = []
    for fd in fundefs:
        fname = FName(fd.fname.name, len(fd.params))
        body = _fix_recursion(fd.body, fd.fname.name, len(fd.params))
        fixed.append(FunDef(fname, fd.params, body))
    fundefs = fixed

    scope: dict[str, str] = {}
    stmts: list[tuple[str, Expr, str]] = []  # (var, bound expr, kind)
    n_spawns = g.rng.randint(1, min(4, n_workers + 2))
    for _ in range(n_spawns):
        fd = g.rng.choice(fundefs)
        v = g.var("P")
        stmts.append((v, Spawn(fd.fname, _spawn_args(g, fd, scope)), "pid"))
        scope[v] = "pid"
    n_extra = g.rng.randint(1, 4)
    for _ in range(n_extra):
        roll = g.rng.random()
        if roll < 0.35 and _pick_var(scope, g.rng, "pid"):
            dest_name = _pick_var(scope, g.rng, "pid")
            dest: Expr = Var(dest_name)
            if g.rng.random() < 0.05:  # deliberate fault: send to a number
                dest = g.int_lit()
            stmts.append((g.var("_@"), Send(dest, _payload(g, scope, SelfCall())), "none"))
        elif roll < 0.55:
            stmts.append((g.var("_@"), CheckCall(), "none"))
        elif roll < 0.8:
            v = g.var("K")
            stmts.append((v, _int_expr(g, scope), "int"))
            scope[v] = "int"
        else:
            v = g.var("Me")
            stmts.append((v, SelfCall(), "pid"))
            scope[v] = "pid"
    # Optionally wait for one reply; otherwise finish with a value.
    if g.rng.random() < 0.5:
        final: Expr = Receive((
            Clause(Tup((Lit("ack"), Var("A"))), Lit("true"), Tup((Lit("got"), Var("A")))),
            Clause(Tup((Lit("tick"), Var("T"))), Lit("true"), Tup((Lit("saw"), Var("T")))),
        ))
    else:
        name = _pick_var(scope, g.rng, "int")
        final = Var(name) if name else g.atom()
    body = final
    for var, bound, _ in reversed(stmts):
        body = Let(var, bound, body)
    fundefs.insert(0, FunDef(ENTRY, (), body))
    return Module(f"gen{seed}", tuple(fundefs))


def _fix_recursion(e: Expr, name: str, arity: int) -> Expr:
    """Rewrite self-applications to the final arity of the function."""
    if isinstance(e, Apply) and e.fname.name == name:
        return Apply(FName(name, arity), tuple(_fix_recursion(a, name, arity) for a in e.args))
    if isinstance(e, Let):
        return Let(e.var, _fix_recursion(e.bound, name, arity),
                   _fix_recursion(e.body, name, arity))
    if isinstance(e, Case):
        return Case(_fix_recursion(e.scrutinee, name, arity),
                    tuple(Clause(c.pattern, c.guard, _fix_recursion(c.body, name, arity))
                          for c in e.clauses))
    if isinstance(e, Receive):
        return Receive(tuple(Clause(c.pattern, c.guard, _fix_recursion(c.body, name, arity))
                             for c in e.clauses))
    if isinstance(e, Send):
        return Send(_fix_recursion(e.dest, name, arity),
                    _fix_recursion(e.payload, name, arity))
    if isinstance(e, Tup):
        return Tup(tuple(_fix_recursion(x, name, arity) for x in e.elems))
    if isinstance(e, Call):
        return Call(e.op, tuple(_fix_recursion(x, name, arity) for x in e.args))
    return e
