"""AST, security environment and pretty-printer for the WHILE language with holes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional

from .lattice import Level

Span = Optional[tuple]  # (line, col)

BINOPS = ("+", "-", "*", "==", "!=", "<", "<=", ">", ">=", "&&", "||")
# binding strength used by the parser and the printer
PRECEDENCE = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
              "+": 5, "-": 5, "*": 6}

INTERNAL_PREFIX = "__chk_"
REACH = "reach"


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: int
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Declassify(Expr):
    expr: Expr
    span: Span = field(default=None, compare=False, repr=False)


# ------------------------------------------------------------------- commands

@dataclass(frozen=True)
class Command:
    pass


@dataclass(frozen=True)
class Halt(Command):
    """Terminal configuration; never written in source."""


HALT = Halt()


@dataclass(frozen=True)
class Skip(Command):
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Assign(Command):
    var: str
    expr: Expr
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    second: Command
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If(Command):
    cond: Expr
    then: Command
    orelse: Command
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class While(Command):
    cond: Expr
    body: Command
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Hole(Command):
    index: int
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Endorse(Command):
    var: str
    label: str
    expr: Expr
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CheckedEndorse(Command):
    label: str
    var: str
    cond: Expr
    then: Command
    orelse: Command
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Bracket(Command):
    """Attacker code in progress; events it produces are tagged as attack events."""
    body: Command


def seq(*cmds: Command) -> Command:
    cmds = [c for c in cmds if c is not None]
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


# ------------------------------------------------------------ environment

@dataclass(frozen=True)
class SecurityEnv:
    decls: tuple  # ((name, Level), ...) in declaration order
    internal: frozenset = frozenset()

    @cached_property
    def levels(self) -> dict:
        return dict(self.decls)

    @property
    def variables(self) -> tuple:
        return tuple(name for name, _ in self.decls)

    def __getitem__(self, name: str) -> Level:
        return self.levels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.levels

    @cached_property
    def public(self) -> frozenset:
        return frozenset(n for n, lv in self.decls if lv.public)

    @cached_property
    def untrusted(self) -> frozenset:
        return frozenset(n for n, lv in self.decls if not lv.trusted)

    @cached_property
    def trusted(self) -> frozenset:
        return frozenset(n for n, lv in self.decls if lv.trusted)

    @cached_property
    def observable_low(self) -> frozenset:
        return self.public - self.internal

    @cached_property
    def observable_trusted(self) -> frozenset:
        return self.trusted - self.internal

    def extend(self, name: str, level: Level, internal: bool = False) -> SecurityEnv:
        internal_set = self.internal | {name} if internal else self.internal
        return SecurityEnv(self.decls + ((name, level),), internal_set)

    def with_level(self, name: str, level: Level) -> SecurityEnv:
        decls = tuple((n, level if n == name else lv) for n, lv in self.decls)
        return SecurityEnv(decls, self.internal)


@dataclass(frozen=True)
class Program:
    env: SecurityEnv
    body: Command
    domain: int = 4
    initial: tuple = ()  # ((var, fixed initial value), ...); used for `reach`

    @cached_property
    def hole_count(self) -> int:
        return sum(1 for c in walk_commands(self.body) if isinstance(c, Hole))

    def with_body(self, body: Command) -> Program:
        return Program(self.env, body, self.domain, self.initial)

    def with_domain(self, n: int) -> Program:
        return Program(self.env, self.body, n, self.initial)


# ------------------------------------------------------------------ traversal

def walk_commands(c: Command) -> Iterator[Command]:
    yield c
    match c:
        case Seq(a, b):
            yield from walk_commands(a)
            yield from walk_commands(b)
        case If(_, a, b) | CheckedEndorse(_, _, _, a, b):
            yield from walk_commands(a)
            yield from walk_commands(b)
        case While(_, body) | Bracket(body):
            yield from walk_commands(body)


def expr_vars(e: Expr) -> set:
    match e:
        case Var(name):
            return {name}
        case BinOp(_, l, r):
            return expr_vars(l) | expr_vars(r)
        case Declassify(inner):
            return expr_vars(inner)
    return set()


def has_declassify(e: Expr) -> bool:
    match e:
        case Declassify():
            return True
        case BinOp(_, l, r):
            return has_declassify(l) or has_declassify(r)
    return False


def command_exprs(c: Command) -> list:
    match c:
        case Assign(_, e) | Endorse(_, _, e):
            return [e]
        case If(e, _, _) | While(e, _) | CheckedEndorse(_, _, e, _, _):
            return [e]
    return []


def command_vars(c: Command) -> set:
    out = set()
    for node in walk_commands(c):
        for e in command_exprs(node):
            out |= expr_vars(e)
        match node:
            case Assign(x, _) | Endorse(x, _, _) | CheckedEndorse(_, x, _, _, _):
                out.add(x)
    return out


def uses_endorse(c: Command) -> bool:
    return any(isinstance(n, Endorse) for n in walk_commands(c))


def uses_checked(c: Command) -> bool:
    return any(isinstance(n, CheckedEndorse) for n in walk_commands(c))


def uses_declassify(c: Command) -> bool:
    return any(has_declassify(e) for n in walk_commands(c) for e in command_exprs(n))


def rename_expr(e: Expr, mapping: dict) -> Expr:
    match e:
        case Var(name, span):
            return Var(mapping.get(name, name), span)
        case BinOp(op, l, r, span):
            return BinOp(op, rename_expr(l, mapping), rename_expr(r, mapping), span)
        case Declassify(inner, span):
            return Declassify(rename_expr(inner, mapping), span)
    return e


def rename_command(c: Command, mapping: dict) -> Command:
    """Capture-free substitution of variables (reads and writes)."""
    r = lambda x: mapping.get(x, x)
    match c:
        case Assign(x, e, span):
            return Assign(r(x), rename_expr(e, mapping), span)
        case Endorse(x, lab, e, span):
            return Endorse(r(x), lab, rename_expr(e, mapping), span)
        case Seq(a, b, span):
            return Seq(rename_command(a, mapping), rename_command(b, mapping), span)
        case If(e, a, b, span):
            return If(rename_expr(e, mapping), rename_command(a, mapping),
                      rename_command(b, mapping), span)
        case While(e, body, span):
            return While(rename_expr(e, mapping), rename_command(body, mapping), span)
        case CheckedEndorse(lab, x, e, a, b, span):
            return CheckedEndorse(lab, r(x), rename_expr(e, mapping),
                                  rename_command(a, mapping), rename_command(b, mapping), span)
        case Bracket(body):
            return Bracket(rename_command(body, mapping))
    return c


# ------------------------------------------------------------- pretty-print

def pretty_expr(e: Expr, parent: int = 0) -> str:
    match e:
        case Const(n):
            return str(n)
        case Var(name):
            return name
        case Declassify(inner):
            return f"declassify({pretty_expr(inner)})"
        case BinOp(op, l, r):
            p = PRECEDENCE[op]
            # left-associative: the right operand needs parens at equal precedence
            s = f"{pretty_expr(l, p)} {op} {pretty_expr(r, p + 1)}"
            return f"({s})" if p < parent else s
    raise TypeError(e)


def _block(c: Command, indent: int) -> str:
    pad = "  " * indent
    inner = pretty_command(c, indent + 1)
    return "{\n" + inner + "\n" + pad + "}"


def pretty_command(c: Command, indent: int = 0) -> str:
    pad = "  " * indent
    match c:
        case Skip():
            return pad + "skip"
        case Halt():
            return pad + "halt"
        case Hole():
            return pad + "[#]"
        case Assign(x, e):
            return f"{pad}{x} := {pretty_expr(e)}"
        case Endorse(x, lab, e):
            return f"{pad}{x} := endorse@{lab}({pretty_expr(e)})"
        case Seq(a, b):
            return pretty_command(a, indent) + ";\n" + pretty_command(b, indent)
        case If(e, a, b):
            return (f"{pad}if ({pretty_expr(e)}) {_block(a, indent)}"
                    f" else {_block(b, indent)}")
        case While(e, body):
            return f"{pad}while ({pretty_expr(e)}) {_block(body, indent)}"
        case CheckedEndorse(lab, x, e, a, b):
            return (f"{pad}endorse@{lab}({x}) if ({pretty_expr(e)}) {_block(a, indent)}"
                    f" else {_block(b, indent)}")
        case Bracket(body):
            return f"{pad}[{pretty_command(body).strip()}]"
    raise TypeError(c)


def pretty_program(p: Program) -> str:
    lines = []
    for name, lv in p.env.decls:
        suffix = " internal" if name in p.env.internal else ""
        lines.append(f"var {name} : {lv.conf.name.lower()} {lv.integ.name.lower()}{suffix};")
    return "\n".join(lines) + "\n" + pretty_command(p.body) + "\n"


def pretty_attack(a) -> str:
    """Attack vector printer, e.g. ``u:=5; u':=0 | skip``."""
    def one(c: Command) -> str:
        match c:
            case Skip():
                return "skip"
            case Assign(x, e):
                return f"{x}:={pretty_expr(e)}"
            case Seq(x, y):
                return f"{one(x)}; {one(y)}"
            case While(e, body):
                return f"while {pretty_expr(e)} {{{one(body)}}}"
        return pretty_command(c).strip()
    return " | ".join(one(c) for c in a) if len(a) else "<no holes>"


# ------------------------------------------------------------------ JSON dump

def expr_json(e: Expr) -> dict:
    match e:
        case Const(n, span):
            return {"kind": "const", "value": n, "span": span}
        case Var(name, span):
            return {"kind": "var", "name": name, "span": span}
        case BinOp(op, l, r, span):
            return {"kind": "binop", "op": op, "children": [expr_json(l), expr_json(r)], "span": span}
        case Declassify(inner, span):
            return {"kind": "declassify", "children": [expr_json(inner)], "span": span}
    raise TypeError(e)


def command_json(c: Command) -> dict:
    span = getattr(c, "span", None)
    match c:
        case Skip():
            return {"kind": "skip", "span": span}
        case Hole(i):
            return {"kind": "hole", "index": i, "span": span}
        case Assign(x, e):
            return {"kind": "assign", "var": x, "children": [expr_json(e)], "span": span}
        case Endorse(x, lab, e):
            return {"kind": "endorse", "var": x, "label": lab, "children": [expr_json(e)], "span": span}
        case Seq(a, b):
            return {"kind": "seq", "children": [command_json(a), command_json(b)], "span": span}
        case If(e, a, b):
            return {"kind": "if", "children": [expr_json(e), command_json(a), command_json(b)], "span": span}
        case While(e, body):
            return {"kind": "while", "children": [expr_json(e), command_json(body)], "span": span}
        case CheckedEndorse(lab, x, e, a, b):
            return {"kind": "checked_endorse", "label": lab, "var": x,
                    "children": [expr_json(e), command_json(a), command_json(b)], "span": span}
    raise TypeError(c)


def program_json(p: Program) -> dict:
    return {
        "env": [{"name": n, "level": str(lv), "internal": n in p.env.internal}
                for n, lv in p.env.decls],
        "domain": p.domain,
        "hole_count": p.hole_count,
        "body": command_json(p.body),
    }
