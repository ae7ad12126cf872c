"""Top-level semantic verdicts.

Every check quantifies over all memories of the (liveness-reduced) memory
space and all fair attacks of an enumerated universe. A reject verdict
carries a replayable witness; an accept verdict is relative to the universe,
which is echoed in the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .attacks import AttackConfig, default_config, enumerate_attacks, universe_for
from .control import engine_for
from .engine import bits, similar_prefix
from .errors import UnsupportedConstruct
from .semantics import (
    PI, PS, TERM, UPSeq, dump_lines, events_until_low,
    events_until_trusted, format_low,
)
from .syntax import Program, pretty_attack, uses_checked, uses_endorse

ROBUSTNESS = "robustness"
ENDORSE = "robustness-endorse"
CHECKED = "robustness-checked"
INTEGRITY = "integrity"


@dataclass
class Verdict:
    status: str  # "accept" | "reject"
    prop: str
    mode: str
    universe: dict
    witness: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.status == "accept"

    def as_dict(self) -> dict:
        return {"status": self.status, "property": self.prop, "mode": self.mode,
                "universe": self.universe, "stats": self.stats, "witness": self.witness}


def _universe_info(p: Program, cfg: AttackConfig, universe: Sequence, eng) -> dict:
    return {"N": p.domain, **cfg.as_dict(), "candidates": len(enumerate_attacks(p, cfg)),
            "fair": len(universe), "memories": len(eng.space.memories),
            "enumerated_vars": list(eng.space.free)}


def _require(p: Program, prop: str) -> None:
    e, c = uses_endorse(p.body), uses_checked(p.body)
    if e and c:
        raise UnsupportedConstruct("programs mixing direct and checked endorsement are not supported")
    if prop == ROBUSTNESS and (e or c):
        raise UnsupportedConstruct("program uses endorsement; check robustness-endorse or robustness-checked")
    if prop == ENDORSE and c:
        raise UnsupportedConstruct("program uses checked endorsement; check robustness-checked")
    if prop == CHECKED and e:
        raise UnsupportedConstruct("program uses direct endorsement; check robustness-endorse")
    if prop == INTEGRITY and c:
        raise UnsupportedConstruct("integrity robustness expects direct endorsements; lower the program first")


def _clauses(inf_a, pos: int, inf_b, mode: str) -> list:
    """Which release-control clauses ``b`` satisfies after its shortest prefix similar to ``a``'s."""
    q = similar_prefix(inf_a, pos, inf_b)
    out = []
    # a final divergence marker is not a release: it falls to the divergence clause
    if any(r >= q for r in inf_b.releases):
        out.append("further release")
    low = inf_b.low
    if low.finite and low.prefix and low.prefix[-1] == TERM:
        out.append("terminates")
    if not out:
        out.append("divergence leaks")
    return out


def _robustness(p: Program, prop: str, mode: str, cfg: Optional[AttackConfig]) -> Verdict:
    _require(p, prop)
    cfg = cfg or default_config(p, mode)
    universe = universe_for(p, mode, cfg)
    eng = engine_for(p, universe)
    info = _universe_info(p, cfg, universe, eng)
    space = eng.space
    checked_points = 0
    for mi in range(len(space.memories)):
        for ai in range(len(universe)):
            inf = eng.info(ai, mode)[mi]
            for j, pos in enumerate(inf.releases):
                checked_points += 1
                rc = eng.release_control(mi, mode, ai, pos)
                after = eng.attacker_control(mi, mode, ai, pos + 1)
                omega = 0
                if prop != ROBUSTNESS and rc & ~after:
                    evs = events_until_low(eng.run(ai, mi), p.env, pos, mode)
                    if prop == ENDORSE:
                        omega = eng.irrelevant(mi, evs.map_filter(_endorse_item))
                    else:
                        omega = eng.irrelevant_checked(mi, evs.map_filter(_checked_item))
                viol = rc & ~omega & ~after
                if viol:
                    bi = bits(viol)[0]
                    witness = _witness(p, eng, mode, mi, ai, bi, j, pos, rc, after, omega)
                    return Verdict("reject", prop, mode, info, witness, {"release_points": checked_points})
    return Verdict("accept", prop, mode, info, None, {"release_points": checked_points})


def _endorse_item(ev):
    return (ev.label, ev.value) if ev.kind == "endorse" else None


def _checked_item(ev):
    return (ev.label, ev.value, ev.bit) if ev.kind == "checked" else None


def _witness(p, eng, mode, mi, ai, bi, j, pos, rc, after, omega) -> dict:
    universe = eng.universe
    inf_a = eng.info(ai, mode)[mi]
    inf_b = eng.info(bi, mode)[mi]
    return {
        "memory": eng.space.as_dict(eng.space.memories[mi]),
        "attack": pretty_attack(universe[ai]),
        "offending_attack": pretty_attack(universe[bi]),
        "release_index": pos,
        "release_event": format_low(inf_a.low[pos]),
        "releases_before": j,
        "low_prefix": [format_low(x) for x in inf_a.low.take(pos)],
        "clause": "release control minus irrelevant attacks not included in attacker control after the release",
        "offending_attack_clauses": _clauses(inf_a, pos, inf_b, mode),
        "trace": dump_lines(eng.run(ai, mi)),
        "offending_trace": dump_lines(eng.run(bi, mi)),
        "sizes": {"release_control": len(bits(rc)), "irrelevant": len(bits(omega)),
                  "attacker_control_after": len(bits(after))},
    }


def check_robustness(p: Program, mode: str = PS, cfg: Optional[AttackConfig] = None) -> Verdict:
    return _robustness(p, ROBUSTNESS, mode, cfg)


def check_robustness_endorse(p: Program, mode: str = PS, cfg: Optional[AttackConfig] = None) -> Verdict:
    return _robustness(p, ENDORSE, mode, cfg)


def check_robustness_checked(p: Program, mode: str = PS, cfg: Optional[AttackConfig] = None) -> Verdict:
    return _robustness(p, CHECKED, mode, cfg)


# ------------------------------------------------------------------- integrity

def _as_seq(t) -> UPSeq:
    return t if isinstance(t, UPSeq) else UPSeq(tuple(t))


def attacker_impact(p: Program, m: Mapping[str, int], trusted, universe: Optional[Sequence] = None) -> frozenset:
    """Attacks whose run from ``m`` produces the trusted events ``trusted``."""
    universe = universe_for(p, PI) if universe is None else tuple(universe)
    eng = engine_for(p, universe)
    mi = eng.space.index[eng.space.normalize(m)]
    t = _as_seq(trusted).prefix
    return frozenset(universe[b] for b in range(len(universe))
                     if eng.trusted_seqs(b)[mi].has_prefix(t))


def progress_impact(p: Program, m: Mapping[str, int], trusted, universe: Optional[Sequence] = None) -> frozenset:
    """Attacks that produce ``trusted`` and at least one further trusted event."""
    universe = universe_for(p, PI) if universe is None else tuple(universe)
    eng = engine_for(p, universe)
    mi = eng.space.index[eng.space.normalize(m)]
    t = _as_seq(trusted).prefix
    out = set()
    for b in range(len(universe)):
        s = eng.trusted_seqs(b)[mi]
        if s.has_prefix(t) and s.length > len(t):
            out.add(universe[b])
    return frozenset(out)


def check_integrity_robustness(p: Program, cfg: Optional[AttackConfig] = None) -> Verdict:
    """Progress-insensitive robustness for integrity, with direct endorsements."""
    _require(p, INTEGRITY)
    cfg = cfg or default_config(p, PI)
    universe = universe_for(p, PI, cfg)
    eng = engine_for(p, universe)
    info = _universe_info(p, cfg, universe, eng)
    n_att = len(universe)
    points = 0
    for mi in range(len(eng.space.memories)):
        seqs = [eng.trusted_seqs(b)[mi] for b in range(n_att)]
        for ai in range(n_att):
            ta = seqs[ai]
            agrees = [(ta.agree(tb), tb.length) for tb in seqs]
            finite = [a for a, _ in agrees if a != math.inf]
            bound = min(ta.length, (max(finite) + 1) if finite else 0)
            for k in range(int(bound)):
                points += 1
                prog = after = 0
                for b, (a, ln) in enumerate(agrees):
                    if a >= k and ln > k:
                        prog |= 1 << b
                    if a >= k + 1:
                        after |= 1 << b
                omega = 0
                if prog & ~after:
                    evs = events_until_trusted(eng.run(ai, mi), p.env, k)
                    omega = eng.irrelevant(mi, evs.map_filter(_endorse_item))
                viol = prog & ~omega & ~after
                if viol:
                    bi = bits(viol)[0]
                    witness = {
                        "memory": eng.space.as_dict(eng.space.memories[mi]),
                        "attack": pretty_attack(universe[ai]),
                        "offending_attack": pretty_attack(universe[bi]),
                        "trusted_index": k,
                        "trusted_event": format_low(ta[k]),
                        "trusted_prefix": [format_low(x) for x in ta.take(k)],
                        "clause": "progress impact minus irrelevant attacks not included in impact after the trusted event",
                        "trace": dump_lines(eng.run(ai, mi)),
                        "offending_trace": dump_lines(eng.run(bi, mi)),
                        "sizes": {"progress_impact": len(bits(prog)), "irrelevant": len(bits(omega)),
                                  "impact_after": len(bits(after))},
                    }
                    return Verdict("reject", INTEGRITY, PI, info, witness, {"trusted_points": points})
    return Verdict("accept", INTEGRITY, PI, info, None, {"trusted_points": points})


CHECKS = {
    ROBUSTNESS: check_robustness,
    ENDORSE: check_robustness_endorse,
    CHECKED: check_robustness_checked,
}


def check(p: Program, prop: str, mode: str = PS, cfg: Optional[AttackConfig] = None) -> Verdict:
    if prop == INTEGRITY:
        return check_integrity_robustness(p, cfg)
    return CHECKS[prop](p, mode, cfg)

