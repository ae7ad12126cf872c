"""Attack universes, injection, fairness and irrelevant attacks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from .engine import checked_irrelevant, direct_irrelevant, substitute_command
from .errors import ArityError
from .knowledge import MemorySpace
from .semantics import (
    PS, Machine, RunResult, UPSeq, checked_events, endorse_events, low_event,
    low_projection, trusted_event,
)
from .syntax import Assign, Command, Const, Program, Skip, While, seq
from .transform import treach

DIVERGE = While(Const(1), Skip())


@dataclass(frozen=True)
class AttackConfig:
    max_len: int = 1
    include_diverge: bool = False

    def as_dict(self) -> dict:
        return {"attack_len": self.max_len, "diverge_attack": self.include_diverge}


def attack_variables(p: Program) -> tuple:
    env = p.env
    return tuple(x for x in env.variables if x in env.untrusted and x not in env.internal)


def default_config(p: Program, mode: str = PS, max_len: Optional[int] = None,
                   include_diverge: Optional[bool] = None) -> AttackConfig:
    if max_len is None:
        max_len = len(attack_variables(p))
    if include_diverge is None:
        include_diverge = mode == PS
    return AttackConfig(max_len, include_diverge)


def attack_components(p: Program, cfg: AttackConfig) -> list:
    """Candidate commands for a single hole, shortest first."""
    out: list = [Skip()]
    assigns = [(x, c) for x in attack_variables(p) for c in range(p.domain)]
    for k in range(1, cfg.max_len + 1):
        for combo in itertools.product(assigns, repeat=k):
            out.append(seq(*(Assign(x, Const(c)) for x, c in combo)))
    if cfg.include_diverge:
        out.append(DIVERGE)
    return out


def enumerate_attacks(p: Program, cfg: AttackConfig = AttackConfig()) -> list:
    """Every attack vector of the (unfiltered) universe, in a fixed order."""
    comps = attack_components(p, cfg)
    return [tuple(v) for v in itertools.product(comps, repeat=p.hole_count)]


def substitute(p: Program, attack: Sequence[Command]) -> Command:
    """Fill hole ``i`` with ``attack[i]`` wrapped as attacker code."""
    attack = tuple(attack)
    if len(attack) != p.hole_count:
        raise ArityError(f"attack has {len(attack)} components, program has {p.hole_count} holes")
    return substitute_command(p.body, attack)


def substituted_program(p: Program, attack: Sequence[Command]) -> Program:
    return p.with_body(substitute(p, attack))


# ------------------------------------------------------------------ fairness

def _agree_profile(lows: list, members: list) -> dict:
    """anchor low sequence -> sorted finite agree values with its class."""
    distinct = list(dict.fromkeys(lows[i] for i in members))
    out = {}
    for s in distinct:
        out[s] = sorted({s.agree(o) for o in distinct} - {math.inf})
    return out


def _segments(r: RunResult, env, stab: int):
    """Attack segments as (low index before, low index after or inf, trusted-clean)."""
    pre, cyc = list(r.prefix), list(r.lasso)
    low_in_cycle = sum(1 for ev in cyc if low_event(ev, env) is not None)
    all_attack = bool(cyc) and all(ev.in_attack for ev in cyc)
    copies = (stab + 1) // max(low_in_cycle, 1) + 2 if cyc else 0
    evs = pre + cyc * copies
    out = []
    low_idx = 0
    i = 0
    while i < len(evs):
        ev = evs[i]
        if not ev.in_attack:
            if low_event(ev, env) is not None:
                low_idx += 1
            i += 1
            continue
        start, clean = low_idx, True
        while i < len(evs) and evs[i].in_attack:
            if low_event(evs[i], env) is not None:
                low_idx += 1
            if trusted_event(evs[i], env) is not None:
                clean = False
            i += 1
        if i == len(evs) and cyc:
            if all_attack:
                out.append((start, math.inf if low_in_cycle else low_idx, clean))
            # otherwise a truncated repetition of an earlier segment
            continue
        out.append((start, low_idx, clean))
    return out


def fairness_violation(p: Program, attack: Sequence[Command]):
    """First memory (as dict) on which ``attack`` is unfair, or None."""
    tp = treach(p)
    prog = tp.with_body(substitute(tp, attack))
    space = MemorySpace(prog, reduce=True)
    machine = Machine(prog.body, space.variables, prog.domain)
    runs = [machine.run(mem) for mem in space.memories]
    lows = [low_projection(r, prog.env, PS) for r in runs]
    for members in space.classes.values():
        profile = _agree_profile(lows, members)
        for i in members:
            agrees = profile[lows[i]]
            stab = (agrees[-1] + 1) if agrees else 0
            for lo, hi, clean in _segments(runs[i], prog.env, stab):
                if not clean or any(lo <= a < hi for a in agrees):
                    return space.as_dict(space.memories[i])
    return None


def is_fair(p: Program, attack: Sequence[Command]) -> bool:
    return fairness_violation(p, attack) is None


@lru_cache(maxsize=64)
def fair_universe(p: Program, cfg: AttackConfig) -> tuple:
    """Fair attack vectors of the enumerated universe (memoized per program and config)."""
    return tuple(vec for vec in enumerate_attacks(p, cfg) if is_fair(p, vec))


def universe_for(p: Program, mode: str = PS, cfg: Optional[AttackConfig] = None) -> tuple:
    return fair_universe(p, cfg or default_config(p, mode))


# ------------------------------------------------------------ irrelevant attacks

def _events_of(tr) -> UPSeq:
    if isinstance(tr, RunResult):
        return tr.events
    if isinstance(tr, UPSeq):
        return tr
    return UPSeq(tuple(tr))


def _run_attack(p: Program, attack, m: Mapping[str, int]) -> RunResult:
    body = substitute(p, attack)
    machine = Machine(body, p.env.variables, p.domain)
    return machine.run(tuple(m[x] for x in p.env.variables))


def irrelevant_attacks(p: Program, m: Mapping[str, int], tr, universe: Optional[Sequence] = None) -> frozenset:
    """Attacks whose run from ``m`` is an irrelevant trace for ``tr`` (direct endorsement)."""
    universe = universe_for(p) if universe is None else universe
    endorsed = endorse_events(_as_run(tr))
    if not endorsed.prefix and not endorsed.cycle:
        return frozenset()
    return frozenset(b for b in universe
                     if direct_irrelevant(endorsed, endorse_events(_run_attack(p, b, m))))


def irrelevant_attacks_checked(p: Program, m: Mapping[str, int], tr,
                               universe: Optional[Sequence] = None) -> frozenset:
    """Attacks whose run from ``m`` is an irrelevant trace for ``tr`` (checked endorsement)."""
    universe = universe_for(p) if universe is None else universe
    checked = checked_events(_as_run(tr))
    if not checked.prefix and not checked.cycle:
        return frozenset()
    return frozenset(b for b in universe
                     if checked_irrelevant(checked, checked_events(_run_attack(p, b, m))))


def _as_run(tr) -> RunResult:
    if isinstance(tr, RunResult):
        return tr
    ev = _events_of(tr)
    return RunResult("partial", ev.prefix, ev.cycle)
