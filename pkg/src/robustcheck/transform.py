"""Source-to-source passes: explicit reachability and checked-endorse lowering."""

from __future__ import annotations

from .errors import ReservedVarError, UnsupportedConstruct
from .lattice import PT, Conf, Integ, Level
from .syntax import (
    INTERNAL_PREFIX, REACH, Assign, BinOp, CheckedEndorse, Command, Const, Endorse,
    Hole, If, Program, SecurityEnv, Seq, Var, While, rename_command, seq, uses_endorse,
)


def treach(p: Program) -> Program:
    """Prefix every hole with ``reach := reach + 1``; ``reach`` is public trusted and starts at 0."""
    if REACH in p.env:
        raise ReservedVarError(f"variable {REACH!r} is reserved for the reachability translation")

    def go(c: Command) -> Command:
        match c:
            case Hole():
                return Seq(Assign(REACH, BinOp("+", Var(REACH), Const(1))), c)
            case Seq(a, b, span):
                return Seq(go(a), go(b), span)
            case If(e, a, b, span):
                return If(e, go(a), go(b), span)
            case While(e, body, span):
                return While(e, go(body), span)
        return c

    env = p.env.extend(REACH, PT)
    return Program(env, go(p.body), p.domain, p.initial + ((REACH, 0),))


def _expr_conf(env: SecurityEnv, e) -> Conf:
    from .typecheck import type_expr
    return type_expr(env, e).level.conf


def temp_name(label: str, k: int) -> str:
    safe = "".join(ch if ch.isalnum() else "_" for ch in str(label))
    return f"{INTERNAL_PREFIX}{safe}_{k}"


def derived_labels(label: str) -> tuple:
    """Labels of the two direct endorsements that replace checked endorsement ``label``."""
    return f"{label}#0", f"{label}#1"


def lower_checked(p: Program) -> Program:
    """Replace each checked endorsement by an endorsed check and an endorsed variable.

    ``endorse@L(x) if (e) {c1} else {c2}`` becomes
    ``t0 := endorse@L#0(e); if (t0) { t1 := endorse@L#1(x); c1[t1/x] } else { c2 }``.
    The temporaries are internal variables, invisible to low and trusted projections.
    """
    if uses_endorse(p.body):
        raise UnsupportedConstruct("lowering expects checked endorsements only")
    env = p.env

    def go(c: Command, gamma: SecurityEnv) -> Command:
        nonlocal env
        match c:
            case CheckedEndorse(label, x, e, c1, c2, span):
                l0, l1 = derived_labels(label)
                t0, t1 = temp_name(label, 0), temp_name(label, 1)
                for name in (t0, t1):
                    if name in env:
                        raise ReservedVarError(f"temporary {name!r} already declared")
                lvl0 = Level(_expr_conf(gamma, e), Integ.TRUSTED)
                lvl1 = Level(gamma[x].conf, Integ.TRUSTED)
                env = env.extend(t0, lvl0, internal=True).extend(t1, lvl1, internal=True)
                gamma = gamma.extend(t0, lvl0, internal=True).extend(t1, lvl1, internal=True)
                then = seq(Endorse(t1, l1, Var(x), span), go(rename_command(c1, {x: t1}), gamma))
                return seq(Endorse(t0, l0, e, span), If(Var(t0), then, go(c2, gamma), span))
            case Seq(a, b, span):
                return Seq(go(a, gamma), go(b, gamma), span)
            case If(e, a, b, span):
                return If(e, go(a, gamma), go(b, gamma), span)
            case While(e, body, span):
                return While(e, go(body, gamma), span)
        return c

    body = go(p.body, env)
    return Program(env, body, p.domain, p.initial)
