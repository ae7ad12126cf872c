"""Knowledge segmentation, attack similarity, attacker control and release control.

Segmentations use cut sets: a set of low positions where a new segment
starts. A cut set is valid when knowledge (PS) or progress knowledge (PI)
is preserved at every position that is not a cut, so the release positions
are exactly the mandatory cuts. The canonical segmentation cuts at the
release positions and nowhere else; similarity is existential over all
valid cut sets and is decided by matching (see ``engine.similar_prefix``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .attacks import substitute, universe_for
from .engine import Engine, bits, release_info, similar_prefix
from .errors import ScaleError
from .knowledge import _class_memories, public_part
from .semantics import DIV, PS, Machine, RunResult, UPSeq, low_projection
from .syntax import Program

ORACLE_LIMIT = 8

_ENGINES: dict = {}


def engine_for(p: Program, universe: Sequence) -> Engine:
    key = (p, tuple(universe))
    eng = _ENGINES.get(key)
    if eng is None:
        if len(_ENGINES) > 16:
            _ENGINES.clear()
        eng = _ENGINES[key] = Engine(p, universe)
    return eng


@dataclass(frozen=True)
class Segmentation:
    cuts: tuple  # low positions starting a new segment (0-based)
    events: tuple  # low events at the cuts
    length: object  # number of low events in the trace (math.inf if unbounded)

    @property
    def size(self) -> int:
        return len(self.cuts) + 1


# ------------------------------------------------------------- direct route

def _run(p: Program, attack, m: Mapping[str, int]) -> RunResult:
    machine = Machine(substitute(p, attack), p.env.variables, p.domain)
    return machine.run(tuple(m[x] for x in p.env.variables))


def _class_lows(p: Program, attack, m: Mapping[str, int], mode: str) -> list:
    """Low sequences of ``p[attack]`` for every full memory in the public class of ``m``."""
    machine = Machine(substitute(p, attack), p.env.variables, p.domain)
    out = []
    for m2 in _class_memories(p, public_part(p, m)):
        r = machine.run(tuple(m2[x] for x in p.env.variables))
        out.append(low_projection(r, p.env, mode))
    return out


def _knowledge_profile(anchor: UPSeq, lows: list, upto: int):
    """For i <= upto: (k(ℓ_i), k→(ℓ_i)) as sets of class positions, by prefix filtering."""
    prof = []
    for i in range(upto + 1):
        pre = anchor.take(i)
        k = frozenset(j for j, s in enumerate(lows) if s.has_prefix(pre))
        kp = frozenset(j for j in k if lows[j].length > i)
        prof.append((k, kp))
    return prof


def _direct_info(p: Program, m: Mapping[str, int], attack, mode: str):
    low = low_projection(_run(p, attack, m), p.env, mode)
    lows = _class_lows(p, attack, m, mode)
    return release_info(low, list(dict.fromkeys(lows)), mode)


def canonical_segmentation(p: Program, m: Mapping[str, int], attack=(), mode: str = PS) -> Segmentation:
    """Cuts exactly at the release events of the run of ``p[attack]`` from ``m``."""
    inf = _direct_info(p, m, attack, mode)
    return Segmentation(inf.releases, inf.events, inf.low.length)


def similar(p: Program, m: Mapping[str, int], a, b, mode: str = PS) -> bool:
    """Are the complete runs of ``p[a]`` and ``p[b]`` from ``m`` similar?

    Decided exactly by subsequence matching with mandatory release cuts;
    both low sequences must be finite.
    """
    ia, ib = _direct_info(p, m, a, mode), _direct_info(p, m, b, mode)
    if ia.low.length == math.inf or ib.low.length == math.inf:
        raise ScaleError("similarity of complete runs needs finite low sequences")
    return similar_prefix(ia, int(ia.low.length), ib, fixed=True) is not None


def valid_cut_sets(low: UPSeq, lows: list, mode: str) -> list:
    """Every cut set of a finite low sequence satisfying the segmentation condition."""
    if low.length == math.inf or low.length > ORACLE_LIMIT:
        raise ScaleError(f"oracle needs at most {ORACLE_LIMIT} low events")
    n = int(low.length)
    prof = _knowledge_profile(low, lows, n)
    out = []
    for k in range(n + 1):
        for cuts in itertools.combinations(range(n), k):
            ok = True
            for i in range(n):
                if i in cuts:
                    continue
                before = prof[i][0] if mode == PS else prof[i][1]
                if before != prof[i + 1][0]:
                    ok = False
                    break
            if ok:
                out.append(cuts)
    return out


def _trace_lows(s: UPSeq) -> UPSeq:
    """Drop a final divergence marker: divergence is not an event of any finite trace."""
    if s.finite and s.prefix and s.prefix[-1] == DIV:
        return UPSeq(s.prefix[:-1])
    return s


def similar_oracle(p: Program, m: Mapping[str, int], a, b, mode: str = PS) -> bool:
    """Existential similarity: some pair of equal-size valid segmentations matches at its cuts."""
    sides = []
    for attack in (a, b):
        low = _trace_lows(low_projection(_run(p, attack, m), p.env, mode))
        lows = [_trace_lows(s) for s in _class_lows(p, attack, m, mode)]
        sides.append({tuple(low[i] for i in cuts) for cuts in valid_cut_sets(low, lows, mode)})
    return bool(sides[0] & sides[1])


# ------------------------------------------------------------- control sets

def _low_length(tr, p: Program, mode: str):
    if tr is None:
        return math.inf
    if isinstance(tr, int):
        return tr
    if isinstance(tr, RunResult):
        return low_projection(tr, p.env, mode).length
    return low_projection(RunResult("partial", tuple(tr)), p.env, mode).length


def _context(p: Program, m, a, tr, mode, universe):
    universe = universe_for(p, mode) if universe is None else tuple(universe)
    a = tuple(a)
    if a not in universe:
        universe = universe + (a,)
    eng = engine_for(p, universe)
    mi = eng.space.index[eng.space.normalize(m)]
    return universe, eng, mi, universe.index(a), _low_length(tr, p, mode)


def _as_set(universe, mask: int) -> frozenset:
    return frozenset(universe[i] for i in bits(mask))


def attacker_control(p: Program, m: Mapping[str, int], a, tr=None, mode: str = PS,
                     universe: Optional[Sequence] = None) -> frozenset:
    """Attacks similar to ``a`` along the prefix ``tr`` of its run (the whole run if None)."""
    universe, eng, mi, ai, length = _context(p, m, a, tr, mode, universe)
    return _as_set(universe, eng.attacker_control(mi, mode, ai, length))


def release_control(p: Program, m: Mapping[str, int], a, tr=None, mode: str = PS,
                    universe: Optional[Sequence] = None) -> frozenset:
    """Attacks similar to ``a`` along ``tr`` that go on to release, leak by divergence, or terminate."""
    universe, eng, mi, ai, length = _context(p, m, a, tr, mode, universe)
    return _as_set(universe, eng.release_control(mi, mode, ai, length))


def release_positions(p: Program, m: Mapping[str, int], a, mode: str = PS,
                      universe: Optional[Sequence] = None) -> tuple:
    """Low positions of release events in the run of ``p[a]`` from ``m``."""
    _, eng, mi, ai, _ = _context(p, m, a, None, mode, universe)
    return eng.info(ai, mode)[mi].releases
