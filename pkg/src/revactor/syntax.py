"""Surface syntax for a first-order actor language.

A program is a module: a named collection of functions `atom/arity`.
Function bodies are expressions built from variables, literals (atoms,
integers, floats, the empty list), list and tuple constructors, builtin
calls, first-order function application, `case`, `let`, `receive`,
`spawn`, message send (`!`), `self()` and `check`.

This module defines the expression datatypes (immutable, hashable where
possible), a tokenizer and recursive-descent parser for the `.rl` text
format, a precedence-aware pretty-printer that round-trips through the
parser, pattern matching, and capture-avoiding substitution of variable
environments into expressions.

Values are the ground subset of expressions: literals, pids, unique
identifiers, and lists/tuples thereof.  Pids and unique ids have no
source syntax; they only arise at runtime.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class SourcePos:
    """Line/column pair used in parse errors."""

    __slots__ = ("line", "col")

    def __init__(self, line: int, col: int) -> None:
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class ParseError(Exception):
    """Raised on malformed module text, with a source position."""

    def __init__(self, msg: str, pos: Optional[SourcePos] = None) -> None:
        where = f" at {pos}" if pos is not None else ""
        super().__init__(f"{msg}{where}")
        self.pos = pos


# ---------------------------------------------------------------------------
# Expression datatypes
# ---------------------------------------------------------------------------


class NilType:
    """The empty list literal.  A singleton; compare with `is` or `==`."""

    _instance: Optional["NilType"] = None

    def __new__(cls) -> "NilType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "[]"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NilType)

    def __hash__(self) -> int:
        return hash("NilType")


NIL = NilType()

LitValue = Union[str, int, float, NilType]


@dataclass(frozen=True)
class Lit:
    """Atom (str), integer, float, or the empty list.

    Equality is type-strict: `Lit(1) != Lit(1.0)`.  Numeric coercion is
    the business of the `==` builtin, not of structural equality.
    """

    value: LitValue

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lit):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("Lit", type(self.value).__name__, self.value))


@dataclass(frozen=True)
class Pid:
    """Process identifier; runtime-only (no source syntax)."""

    index: int

    def __str__(self) -> str:
        return f"p{self.index}"


@dataclass(frozen=True)
class Uid:
    """Unique identifier; runtime-only, created by `check` and by sends."""

    index: int

    def __str__(self) -> str:
        return f"#t{self.index}"


@dataclass(frozen=True)
class Var:
    """Variable.  Anonymous `_` parses to a fresh internal name `_@k`."""

    name: str


@dataclass(frozen=True)
class FName:
    """Function name `atom/arity`; first-order, not a value."""

    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True)
class Cons:
    head: "Expr"
    tail: "Expr"


@dataclass(frozen=True)
class Tup:
    elems: tuple["Expr", ...]


@dataclass(frozen=True)
class Call:
    """Builtin operation on fully evaluated arguments."""

    op: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Apply:
    """First-order application of a module function."""

    fname: FName
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Clause:
    """`pattern when guard -> body`; guard defaults to the atom true."""

    pattern: "Expr"
    guard: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Case:
    scrutinee: "Expr"
    clauses: tuple[Clause, ...]


@dataclass(frozen=True)
class Let:
    var: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Receive:
    clauses: tuple[Clause, ...]


@dataclass(frozen=True)
class Spawn:
    """`spawn(f/n, [e1, ..., en])`; arguments stay unevaluated."""

    fname: FName
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Send:
    dest: "Expr"
    payload: "Expr"


@dataclass(frozen=True)
class SelfCall:
    pass


@dataclass(frozen=True)
class CheckCall:
    pass


@dataclass(frozen=True)
class Hole:
    """Placeholder left by receive/spawn/self/check until the scheduler
    fills it with the corresponding runtime value."""

    pass


HOLE = Hole()

Expr = Union[
    Lit, Pid, Uid, Var, FName, Cons, Tup, Call, Apply, Case, Let,
    Receive, Spawn, Send, SelfCall, CheckCall, Hole,
]

Value = Union[Lit, Pid, Uid, Cons, Tup]


@dataclass(frozen=True)
class FunDef:
    fname: FName
    params: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class Module:
    name: str
    funs: tuple[FunDef, ...]

    def fun(self, fname: FName) -> Optional[FunDef]:
        for fd in self.funs:
            if fd.fname == fname:
                return fd
        return None


def is_value(e: Expr) -> bool:
    """Ground values: literals, pids, uids, and lists/tuples of values."""
    if isinstance(e, (Lit, Pid, Uid)):
        return True
    if isinstance(e, Cons):
        return is_value(e.head) and is_value(e.tail)
    if isinstance(e, Tup):
        return all(is_value(x) for x in e.elems)
    return False


def is_anonymous(name: str) -> bool:
    """True for internal names minted from the `_` wildcard."""
    return name.startswith("_@")


# ---------------------------------------------------------------------------
# Pattern matching and substitution
# ---------------------------------------------------------------------------

Env = dict[str, Value]


def exact_equal(a: Value, b: Value) -> bool:
    """Type-strict structural equality (no numeric coercion)."""
    return a == b


def pattern_vars(pat: Expr) -> set[str]:
    """Variables bound by a pattern, excluding anonymous ones."""
    out: set[str] = set()

    def walk(p: Expr) -> None:
        if isinstance(p, Var):
            if not is_anonymous(p.name):
                out.add(p.name)
        elif isinstance(p, Cons):
            walk(p.head)
            walk(p.tail)
        elif isinstance(p, Tup):
            for x in p.elems:
                walk(x)

    walk(pat)
    return out


def match_pattern(pat: Expr, value: Value) -> Optional[Env]:
    """Match a linear-or-repeated-variable pattern against a value.

    Returns the binding environment on success, None on failure.
    Repeated variables must bind structurally equal values.  Literal
    subpatterns compare type-strictly, so the pattern 1 does not match
    the value 1.0.
    """
    bindings: Env = {}

    def walk(p: Expr, v: Value) -> bool:
        if isinstance(p, Var):
            if is_anonymous(p.name):
                return True
            if p.name in bindings:
                return exact_equal(bindings[p.name], v)
            bindings[p.name] = v
            return True
        if isinstance(p, Lit):
            return isinstance(v, Lit) and exact_equal(p, v)
        if isinstance(p, (Pid, Uid)):
            return p == v
        if isinstance(p, Cons):
            return isinstance(v, Cons) and walk(p.head, v.head) and walk(p.tail, v.tail)
        if isinstance(p, Tup):
            return (
                isinstance(v, Tup)
                and len(p.elems) == len(v.elems)
                and all(walk(pe, ve) for pe, ve in zip(p.elems, v.elems))
            )
        return False

    return bindings if walk(pat, value) else None


def subst_extend(env: Env, bindings: Env) -> Env:
    """Environment update; new bindings override old ones."""
    out = dict(env)
    out.update(bindings)
    return out


def subst_apply(env: Env, expr: Expr) -> Expr:
    """Replace free variables of `expr` by their `env` values.

    Binders shadow: `let X` removes X from scope in its body, and
    pattern variables shadow inside clause guards and bodies.
    """
    if isinstance(expr, Var):
        return env.get(expr.name, expr)
    if isinstance(expr, (Lit, Pid, Uid, FName, SelfCall, CheckCall, Hole)):
        return expr
    if isinstance(expr, Cons):
        return Cons(subst_apply(env, expr.head), subst_apply(env, expr.tail))
    if isinstance(expr, Tup):
        return Tup(tuple(subst_apply(env, x) for x in expr.elems))
    if isinstance(expr, Call):
        return Call(expr.op, tuple(subst_apply(env, x) for x in expr.args))
    if isinstance(expr, Apply):
        return Apply(expr.fname, tuple(subst_apply(env, x) for x in expr.args))
    if isinstance(expr, Spawn):
        return Spawn(expr.fname, tuple(subst_apply(env, x) for x in expr.args))
    if isinstance(expr, Send):
        return Send(subst_apply(env, expr.dest), subst_apply(env, expr.payload))
    if isinstance(expr, Let):
        inner = {k: v for k, v in env.items() if k != expr.var}
        return Let(expr.var, subst_apply(env, expr.bound), subst_apply(inner, expr.body))
    if isinstance(expr, Case):
        return Case(
            subst_apply(env, expr.scrutinee),
            tuple(_subst_clause(env, cl) for cl in expr.clauses),
        )
    if isinstance(expr, Receive):
        return Receive(tuple(_subst_clause(env, cl) for cl in expr.clauses))
    raise TypeError(f"cannot substitute into {type(expr).__name__}")


def _subst_clause(env: Env, cl: Clause) -> Clause:
    shadowed = pattern_vars(cl.pattern)
    inner = {k: v for k, v in env.items() if k not in shadowed}
    return Clause(cl.pattern, subst_apply(inner, cl.guard), subst_apply(inner, cl.body))


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "module", "fun", "let", "in", "case", "of", "end", "receive", "when",
    "spawn", "self", "check", "call", "apply", "and", "or", "not", "rem",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<float>\d+\.\d+([eE][+-]?\d+)?)
  | (?P<int>\d+)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<op>->|==|/=|=<|>=|[()\[\]{},;|!=+\-*/<>])
""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: SourcePos = field(compare=False)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"unexpected character {source[i]!r}", SourcePos(line, col))
        text = m.group(0)
        kind = m.lastgroup or ""
        if kind not in ("ws", "comment"):
            if kind == "atom" and text in KEYWORDS:
                kind = text
            elif kind == "op":
                kind = text
            tokens.append(Token(kind, text, SourcePos(line, col)))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(Token("eof", "", SourcePos(line, col)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_CMP_OPS = {"==", "/=", "<", "=<", ">", ">="}
_GUARD_OK_OPS = _CMP_OPS | {"+", "-", "*", "/", "rem", "and", "or", "not"}


class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.i = 0
        self.anon_counter = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.pos)
        return self.next()

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def fresh_anon(self) -> str:
        name = f"_@{self.anon_counter}"
        self.anon_counter += 1
        return name

    # -- module structure ---------------------------------------------------

    def parse_module(self) -> Module:
        self.expect("module")
        name = self.expect("atom").text
        self.expect("=")
        funs = [self.parse_fundef()]
        while self.at(","):
            self.next()
            funs.append(self.parse_fundef())
        self.expect("eof")
        seen: set[FName] = set()
        for fd in funs:
            if fd.fname in seen:
                raise ParseError(f"duplicate function {fd.fname}")
            seen.add(fd.fname)
        return Module(name, tuple(funs))

    def parse_fundef(self) -> FunDef:
        start = self.peek().pos
        fname = self.parse_fname()
        self.expect("=")
        self.expect("fun")
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.parse_param())
            while self.at(","):
                self.next()
                params.append(self.parse_param())
        self.expect(")")
        self.expect("->")
        body = self.parse_expr()
        if len(params) != fname.arity:
            raise ParseError(
                f"arity mismatch: {fname} declared with {len(params)} parameter(s)", start
            )
        return FunDef(fname, tuple(params), body)

    def parse_param(self) -> str:
        tok = self.expect("var")
        return self.fresh_anon() if tok.text == "_" else tok.text

    def parse_fname(self) -> FName:
        name = self.expect("atom").text
        self.expect("/")
        arity = int(self.expect("int").text)
        return FName(name, arity)

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_send()

    def parse_send(self) -> Expr:
        left = self.parse_or()
        if self.at("!"):
            self.next()
            right = self.parse_send()
            return Send(left, right)
        return left

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.at("or"):
            self.next()
            left = Call("or", (left, self.parse_and()))
        return left

    def parse_and(self) -> Expr:
        left = self.parse_cmp()
        while self.at("and"):
            self.next()
            left = Call("and", (left, self.parse_cmp()))
        return left

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        if self.peek().kind in _CMP_OPS:
            op = self.next().kind
            return Call(op, (left, self.parse_add()))
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            left = Call(op, (left, self.parse_mul()))
        return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while self.peek().kind in ("*", "/", "rem"):
            op = self.next().kind
            left = Call(op, (left, self.parse_unary()))
        return left

    def parse_unary(self) -> Expr:
        if self.at("not"):
            self.next()
            return Call("not", (self.parse_unary(),))
        if self.at("-"):
            self.next()
            operand = self.parse_unary()
            if isinstance(operand, Lit) and isinstance(operand.value, (int, float)):
                return Lit(-operand.value)
            return Call("-", (operand,))
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Lit(int(tok.text))
        if tok.kind == "float":
            self.next()
            return Lit(float(tok.text))
        if tok.kind == "atom":
            self.next()
            return Lit(tok.text)
        if tok.kind == "var":
            self.next()
            name = self.fresh_anon() if tok.text == "_" else tok.text
            return Var(name)
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "[":
            return self.parse_list()
        if tok.kind == "{":
            return self.parse_tuple()
        if tok.kind == "let":
            return self.parse_let()
        if tok.kind == "case":
            return self.parse_case()
        if tok.kind == "receive":
            return self.parse_receive()
        if tok.kind == "spawn":
            return self.parse_spawn()
        if tok.kind == "self":
            self.next()
            self.expect("(")
            self.expect(")")
            return SelfCall()
        if tok.kind == "check":
            self.next()
            return CheckCall()
        if tok.kind == "call":
            return self.parse_call()
        if tok.kind == "apply":
            return self.parse_apply()
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

    def parse_list(self) -> Expr:
        self.expect("[")
        if self.at("]"):
            self.next()
            return Lit(NIL)
        elems = [self.parse_expr()]
        while self.at(","):
            self.next()
            elems.append(self.parse_expr())
        tail: Expr = Lit(NIL)
        if self.at("|"):
            self.next()
            tail = self.parse_expr()
        self.expect("]")
        out = tail
        for e in reversed(elems):
            out = Cons(e, out)
        return out

    def parse_tuple(self) -> Expr:
        self.expect("{")
        elems: list[Expr] = []
        if not self.at("}"):
            elems.append(self.parse_expr())
            while self.at(","):
                self.next()
                elems.append(self.parse_expr())
        self.expect("}")
        return Tup(tuple(elems))

    def parse_let(self) -> Expr:
        self.expect("let")
        tok = self.expect("var")
        var = self.fresh_anon() if tok.text == "_" else tok.text
        self.expect("=")
        bound = self.parse_expr()
        self.expect("in")
        body = self.parse_expr()
        return Let(var, bound, body)

    def parse_case(self) -> Expr:
        self.expect("case")
        scrutinee = self.parse_expr()
        self.expect("of")
        clauses = self.parse_clauses()
        self.expect("end")
        return Case(scrutinee, clauses)

    def parse_receive(self) -> Expr:
        self.expect("receive")
        clauses = self.parse_clauses()
        self.expect("end")
        return Receive(clauses)

    def parse_clauses(self) -> tuple[Clause, ...]:
        clauses = [self.parse_clause()]
        while self.at(";"):
            self.next()
            clauses.append(self.parse_clause())
        return tuple(clauses)

    def parse_clause(self) -> Clause:
        pat = self.parse_pattern()
        guard: Expr = Lit("true")
        if self.at("when"):
            pos = self.peek().pos
            self.next()
            guard = self.parse_expr()
            if not _valid_guard(guard):
                raise ParseError("invalid guard: only builtin operations allowed", pos)
        self.expect("->")
        body = self.parse_expr()
        return Clause(pat, guard, body)

    def parse_pattern(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Lit(int(tok.text))
        if tok.kind == "float":
            self.next()
            return Lit(float(tok.text))
        if tok.kind == "-":
            self.next()
            num = self.peek()
            if num.kind == "int":
                self.next()
                return Lit(-int(num.text))
            if num.kind == "float":
                self.next()
                return Lit(-float(num.text))
            raise ParseError("expected number after '-' in pattern", num.pos)
        if tok.kind == "atom":
            self.next()
            return Lit(tok.text)
        if tok.kind == "var":
            self.next()
            name = self.fresh_anon() if tok.text == "_" else tok.text
            return Var(name)
        if tok.kind == "[":
            self.next()
            if self.at("]"):
                self.next()
                return Lit(NIL)
            elems = [self.parse_pattern()]
            while self.at(","):
                self.next()
                elems.append(self.parse_pattern())
            tail: Expr = Lit(NIL)
            if self.at("|"):
                self.next()
                tail = self.parse_pattern()
            self.expect("]")
            out = tail
            for e in reversed(elems):
                out = Cons(e, out)
            return out
        if tok.kind == "{":
            self.next()
            elems = []
            if not self.at("}"):
                elems.append(self.parse_pattern())
                while self.at(","):
                    self.next()
                    elems.append(self.parse_pattern())
            self.expect("}")
            return Tup(tuple(elems))
        raise ParseError(f"invalid pattern starting with {tok.text!r}", tok.pos)

    def parse_spawn(self) -> Expr:
        pos = self.peek().pos
        self.expect("spawn")
        self.expect("(")
        fname = self.parse_fname()
        self.expect(",")
        self.expect("[")
        args: list[Expr] = []
        if not self.at("]"):
            args.append(self.parse_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_expr())
        self.expect("]")
        self.expect(")")
        if len(args) != fname.arity:
            raise ParseError(f"arity mismatch: spawn of {fname} got {len(args)} argument(s)", pos)
        return Spawn(fname, tuple(args))

    def parse_apply(self) -> Expr:
        pos = self.peek().pos
        self.expect("apply")
        fname = self.parse_fname()
        self.expect("(")
        args: list[Expr] = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        if len(args) != fname.arity:
            raise ParseError(f"arity mismatch: apply of {fname} got {len(args)} argument(s)", pos)
        return Apply(fname, tuple(args))

    def parse_call(self) -> Expr:
        self.expect("call")
        tok = self.next()
        if tok.kind in _GUARD_OK_OPS or tok.kind == "atom":
            op = tok.kind if tok.kind != "atom" else tok.text
        else:
            raise ParseError(f"unknown builtin {tok.text!r}", tok.pos)
        self.expect("(")
        args: list[Expr] = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        return Call(op, tuple(args))


def _valid_guard(e: Expr) -> bool:
    """Guards may only contain variables, literals, and builtin calls."""
    if isinstance(e, (Var, Lit, Pid, Uid)):
        return True
    if isinstance(e, Call):
        return all(_valid_guard(a) for a in e.args)
    if isinstance(e, Cons):
        return _valid_guard(e.head) and _valid_guard(e.tail)
    if isinstance(e, Tup):
        return all(_valid_guard(x) for x in e.elems)
    return False


def parse_module(source: str) -> Module:
    """Parse `.rl` module text.  Raises ParseError with a position."""
    return _Parser(tokenize(source)).parse_module()


def parse_expr(source: str) -> Expr:
    """Parse a standalone expression (mainly for tests and the REPL)."""
    parser = _Parser(tokenize(source))
    expr = parser.parse_expr()
    parser.expect("eof")
    return expr


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

# Precedence levels: higher binds tighter.  `let`, `case`, `receive` are
# syntactic primaries but extend greedily to the right, so as operands
# they always get parentheses (level 0).
_LEVEL_SEND = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_CMP = 4
_LEVEL_ADD = 5
_LEVEL_MUL = 6
_LEVEL_UNARY = 7
_LEVEL_PRIMARY = 8

_BINOP_LEVEL = {
    "or": _LEVEL_OR, "and": _LEVEL_AND,
    "==": _LEVEL_CMP, "/=": _LEVEL_CMP, "<": _LEVEL_CMP,
    "=<": _LEVEL_CMP, ">": _LEVEL_CMP, ">=": _LEVEL_CMP,
    "+": _LEVEL_ADD, "-": _LEVEL_ADD,
    "*": _LEVEL_MUL, "/": _LEVEL_MUL, "rem": _LEVEL_MUL,
}


def pretty_expr(e: Expr) -> str:
    return _pp(e, 0)


def _pp(e: Expr, min_level: int) -> str:
    text, level = _pp_level(e)
    if level < min_level:
        return f"({text})"
    return text


def _pp_level(e: Expr) -> tuple[str, int]:
    if isinstance(e, Lit):
        return _pp_lit(e), _LEVEL_PRIMARY
    if isinstance(e, Pid):
        return str(e), _LEVEL_PRIMARY
    if isinstance(e, Uid):
        return str(e), _LEVEL_PRIMARY
    if isinstance(e, Var):
        return ("_" if is_anonymous(e.name) else e.name), _LEVEL_PRIMARY
    if isinstance(e, FName):
        return str(e), _LEVEL_PRIMARY
    if isinstance(e, Hole):
        return "•", _LEVEL_PRIMARY
    if isinstance(e, Cons):
        return _pp_list(e), _LEVEL_PRIMARY
    if isinstance(e, Tup):
        return "{" + ", ".join(_pp(x, 0) for x in e.elems) + "}", _LEVEL_PRIMARY
    if isinstance(e, Call):
        return _pp_call(e)
    if isinstance(e, Apply):
        args = ", ".join(_pp(a, 0) for a in e.args)
        return f"apply {e.fname} ({args})", _LEVEL_PRIMARY
    if isinstance(e, Spawn):
        args = ", ".join(_pp(a, 0) for a in e.args)
        return f"spawn({e.fname}, [{args}])", _LEVEL_PRIMARY
    if isinstance(e, Send):
        left = _pp(e.dest, _LEVEL_SEND + 1)
        right = _pp(e.payload, _LEVEL_SEND)
        return f"{left} ! {right}", _LEVEL_SEND
    if isinstance(e, Let):
        var = "_" if is_anonymous(e.var) else e.var
        return f"let {var} = {_pp(e.bound, 1)} in {_pp(e.body, 0)}", 0
    if isinstance(e, Case):
        clauses = "; ".join(_pp_clause(c) for c in e.clauses)
        return f"case {_pp(e.scrutinee, 1)} of {clauses} end", _LEVEL_PRIMARY
    if isinstance(e, Receive):
        clauses = "; ".join(_pp_clause(c) for c in e.clauses)
        return f"receive {clauses} end", _LEVEL_PRIMARY
    if isinstance(e, SelfCall):
        return "self()", _LEVEL_PRIMARY
    if isinstance(e, CheckCall):
        return "check", _LEVEL_PRIMARY
    raise TypeError(f"cannot print {type(e).__name__}")


def _pp_lit(e: Lit) -> str:
    if isinstance(e.value, NilType):
        return "[]"
    if isinstance(e.value, (int, float)) and e.value < 0:
        return f"(-{-e.value!r})" if isinstance(e.value, float) else f"(-{-e.value})"
    return str(e.value) if not isinstance(e.value, float) else repr(e.value)


def _pp_list(e: Cons) -> str:
    elems: list[str] = []
    cur: Expr = e
    while isinstance(cur, Cons):
        elems.append(_pp(cur.head, 0))
        cur = cur.tail
    if isinstance(cur, Lit) and isinstance(cur.value, NilType):
        return "[" + ", ".join(elems) + "]"
    return "[" + ", ".join(elems) + " | " + _pp(cur, 0) + "]"


def _pp_call(e: Call) -> tuple[str, int]:
    if e.op in _BINOP_LEVEL and len(e.args) == 2:
        level = _BINOP_LEVEL[e.op]
        left_level = level + 1 if level == _LEVEL_CMP else level
        left = _pp(e.args[0], left_level)
        right = _pp(e.args[1], level + 1)
        return f"{left} {e.op} {right}", level
    if e.op == "not" and len(e.args) == 1:
        return f"not {_pp(e.args[0], _LEVEL_UNARY)}", _LEVEL_UNARY
    if e.op == "-" and len(e.args) == 1:
        return f"-{_pp(e.args[0], _LEVEL_UNARY)}", _LEVEL_UNARY
    args = ", ".join(_pp(a, 0) for a in e.args)
    return f"call {e.op}({args})", _LEVEL_PRIMARY


def _pp_clause(c: Clause) -> str:
    pat = _pp(c.pattern, 0)
    body = _pp(c.body, 0)
    if c.guard == Lit("true"):
        return f"{pat} -> {body}"
    return f"{pat} when {_pp(c.guard, 1)} -> {body}"


def pretty_module(m: Module) -> str:
    parts = []
    for fd in m.funs:
        params = ", ".join("_" if is_anonymous(p) else p for p in fd.params)
        parts.append(f"{fd.fname} = fun ({params}) -> {pretty_expr(fd.body)}")
    sep = ",\n  "
    return f"module {m.name} =\n  " + sep.join(parts) + "\n"
