"""Security type system for commands with holes, declassification and endorsement.

Judgements are ``Γ ⊢ e : ℓ, D`` for expressions (``D`` = variables that may
be declassified) and ``Γ, pc ⊢ c`` for commands. Checking never stops at the
first error: each node reports its first failing premise and its children
are still visited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lattice import BOTTOM, PT, PU, ST, Level
from .syntax import (
    Assign, BinOp, Bracket, CheckedEndorse, Command, Const, Declassify, Endorse,
    Expr, Hole, If, Program, SecurityEnv, Seq, Skip, Var, While, expr_vars,
)


@dataclass(frozen=True)
class ExprTyping:
    level: Level
    declassified: frozenset = frozenset()


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    premise: str
    span: tuple | None = field(default=None)
    message: str = ""

    def as_dict(self) -> dict:
        return {"rule": self.rule, "premise": self.premise,
                "span": list(self.span) if self.span else None, "message": self.message}

    def __str__(self) -> str:
        where = f"{self.span[0]}:{self.span[1]}: " if self.span else ""
        return f"{where}{self.rule}: {self.premise} ({self.message})"


def type_expr(env: SecurityEnv, e: Expr) -> ExprTyping:
    match e:
        case Const():
            return ExprTyping(BOTTOM)
        case Var(x):
            return ExprTyping(env[x])
        case BinOp(_, l, r):
            tl, tr = type_expr(env, l), type_expr(env, r)
            return ExprTyping(tl.level | tr.level, tl.declassified | tr.declassified)
        case Declassify(inner):
            t = type_expr(env, inner)
            return ExprTyping(t.level & PU, frozenset(expr_vars(inner)))
    raise TypeError(e)


def type_command(env: SecurityEnv, pc: Level, c: Command) -> list:
    """Diagnostics for ``Γ, pc ⊢ c``; an empty list means the command is well typed."""
    out: list = []
    _check(env, pc, c, out)
    return out


def _span(c) -> tuple | None:
    return getattr(c, "span", None)


def _check(env: SecurityEnv, pc: Level, c: Command, out: list) -> None:
    def fail(rule, premise, msg):
        out.append(Diagnostic(rule, premise, _span(c), msg))

    match c:
        case Skip():
            return
        case Seq(a, b):
            _check(env, pc, a, out)
            _check(env, pc, b, out)
        case Assign(x, e):
            t = type_expr(env, e)
            bad = sorted(y for y in t.declassified if not env[y] <= ST)
            if not (t.level | pc) <= env[x]:
                fail("T-ASGMT", "ℓ ⊔ pc ⊑ Γ(x)",
                     f"{t.level | pc} flows into {x} : {env[x]}")
            elif bad:
                fail("T-ASGMT", "∀y ∈ D. Γ(y) ⊑ (secret, trusted)",
                     f"declassified untrusted variable(s) {', '.join(bad)}")
            elif t.declassified and not pc <= PT:
                fail("T-ASGMT", "D ≠ ∅ ⟹ pc ⊑ (public, trusted)",
                     f"declassification under pc {pc}")
        case If(e, a, b):
            t = type_expr(env, e)
            if t.declassified:
                fail("T-IF", "guard D = ∅", "declassification in a guard")
            _check(env, pc | t.level, a, out)
            _check(env, pc | t.level, b, out)
        case While(e, body):
            t = type_expr(env, e)
            if t.declassified:
                fail("T-WHILE", "guard D = ∅", "declassification in a guard")
            _check(env, pc | t.level, body, out)
        case Hole():
            if not pc <= PU:
                fail("T-HOLE", "pc ⊑ (public, untrusted)", f"hole under pc {pc}")
        case Endorse(x, _, e):
            t = type_expr(env, e)
            if not (pc | env[x]) <= ST:
                fail("T-ENDORSE", "pc ⊔ Γ(x) ⊑ (secret, trusted)",
                     f"endorsing into {x} : {env[x]} under pc {pc}")
            elif not pc <= env[x]:
                fail("T-ENDORSE", "pc ⊑ Γ(x)", f"pc {pc} does not flow into {x} : {env[x]}")
            elif t.declassified and not pc <= PT:
                fail("T-ENDORSE", "D ≠ ∅ ⟹ pc ⊑ (public, trusted)",
                     f"declassification under pc {pc}")
            elif not (t.level & ST) <= env[x]:
                fail("T-ENDORSE", "ℓ ⊓ (secret, trusted) ⊑ Γ(x)",
                     f"{t.level & ST} flows into {x} : {env[x]}")
        case CheckedEndorse(_, x, e, a, b):
            boosted = env.with_level(x, env[x] & ST)
            t = type_expr(boosted, e)
            pc2 = pc | t.level
            if not pc2 <= ST:
                fail("T-CHECKED", "pc' = pc ⊔ ℓ' ⊑ (secret, trusted)",
                     f"check runs under untrusted pc' {pc2}")
            _check(boosted, pc2, a, out)
            _check(env, pc2, b, out)
        case Bracket(body):
            _check(env, pc, body, out)
        case _:
            raise TypeError(c)


def typecheck(p: Program, pc: Level = BOTTOM) -> list:
    return type_command(p.env, pc, p.body)


def well_typed(p: Program, pc: Level = BOTTOM) -> bool:
    return not typecheck(p, pc)
