"""Bulk evaluation shared by fairness, control and robustness.

For a program ``c[•]`` and a finite attack universe, :class:`Engine` runs
every substituted program from every memory once and derives, per
``(attack, memory, mode)``, the release positions and the release-control
flags. Knowledge sets along a run are never materialized: for an anchor run
``S``, ``k(S[:L])`` is the set of class members whose low sequence agrees with
``S`` on at least ``L`` events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .knowledge import MemorySpace
from .semantics import (
    DIV, PI, PS, TERM, Machine, RunResult, UPSeq, checked_events, endorse_events,
    low_projection, trusted_projection,
)
from .syntax import Bracket, Command, Hole, If, Program, Seq, While, CheckedEndorse


def substitute_command(body: Command, attacks: Sequence[Command]) -> Command:
    def go(c: Command) -> Command:
        match c:
            case Hole(i):
                return Bracket(attacks[i])
            case Seq(a, b, span):
                return Seq(go(a), go(b), span)
            case If(e, a, b, span):
                return If(e, go(a), go(b), span)
            case While(e, b, span):
                return While(e, go(b), span)
            case CheckedEndorse(lab, x, e, a, b, span):
                return CheckedEndorse(lab, x, e, go(a), go(b), span)
        return c
    return go(body)


def _terminated(seq_: UPSeq) -> bool:
    return seq_.finite and bool(seq_.prefix) and seq_.prefix[-1] == TERM


@dataclass(frozen=True)
class ReleaseInfo:
    low: UPSeq
    releases: tuple  # low positions of release events
    events: tuple  # the release events themselves
    agrees: tuple  # (agree length, length, terminated) against each distinct class sequence
    mode: str = PS

    def can_release(self, lo: int) -> bool:
        """Does the run, after its first ``lo`` low events, release, leak by divergence, or terminate?"""
        n = self.low.length
        if self.mode == PS:
            return (any(lo <= a < n for a, _, _ in self.agrees)
                    or any(a >= lo and t for a, _, t in self.agrees))
        return any(lo <= a < n and ln > lo for a, ln, _ in self.agrees) or _terminated(self.low)

    @cached_property
    def horizon(self):
        """Largest ``lo`` with ``can_release(lo)`` (monotone in ``lo``); -1 if none."""
        n = self.low.length
        best = -1
        for a, ln, t in self.agrees:
            if self.mode == PS:
                if a < n or t:
                    best = max(best, a)
            elif a < n:
                best = max(best, min(a, ln - 1))
        if self.mode == PI and _terminated(self.low):
            best = math.inf
        return best


class Engine:
    """Runs of ``p[b]`` for every attack vector ``b`` of a universe, on every memory."""

    def __init__(self, program: Program, universe: Sequence[tuple], reduce: bool = True):
        self.program = program
        self.universe = list(universe)
        self.space = MemorySpace(program, reduce)
        self._runs: dict = {}
        self._info: dict = {}
        self._lows: dict = {}
        self._mask_cache: dict = {}

    # -- runs
    def runs(self, b: int) -> list:
        got = self._runs.get(b)
        if got is None:
            body = substitute_command(self.program.body, self.universe[b])
            machine = Machine(body, self.space.variables, self.program.domain)
            got = [machine.run(mem) for mem in self.space.memories]
            self._runs[b] = got
        return got

    def run(self, b: int, mi: int) -> RunResult:
        return self.runs(b)[mi]

    def lows(self, b: int, mode: str) -> list:
        key = (b, mode)
        got = self._lows.get(key)
        if got is None:
            env = self.program.env
            got = [low_projection(r, env, mode) for r in self.runs(b)]
            self._lows[key] = got
        return got

    # -- release structure
    def info(self, b: int, mode: str) -> list:
        """ReleaseInfo for every memory index under attack ``b``."""
        key = (b, mode)
        got = self._info.get(key)
        if got is not None:
            return got
        lows = self.lows(b, mode)
        out = [None] * len(lows)
        for members in self.space.classes.values():
            distinct: dict = {}
            for i in members:
                distinct.setdefault(lows[i], None)
            others = list(distinct)
            cache: dict = {}
            for i in members:
                s = lows[i]
                if s not in cache:
                    cache[s] = release_info(s, others, mode)
                out[i] = cache[s]
        self._info[key] = out
        return out

    def fair_mask(self) -> int:
        return (1 << len(self.universe)) - 1

    # -- masks over attack indices, per memory
    def groups(self, mi: int, mode: str) -> list:
        """Distinct low sequences at memory ``mi`` as (ReleaseInfo, attack bitmask)."""
        key = ("groups", mi, mode)
        got = self._mask_cache.get(key)
        if got is None:
            by_low: dict = {}
            for b in range(len(self.universe)):
                inf = self.info(b, mode)[mi]
                _, mask = by_low.get(inf.low, (inf, 0))
                by_low[inf.low] = (inf, mask | (1 << b))
            got = self._mask_cache[key] = list(by_low.values())
        return got

    def _clip(self, anchor: ReleaseInfo, length) -> int:
        if length == math.inf or length > anchor.low.length:
            length = anchor.low.length
        if length == math.inf:
            # optional events never constrain similarity
            length = (anchor.releases[-1] + 1) if anchor.releases else 0
        return int(length)

    def control(self, mi: int, mode: str, a: int, length) -> tuple:
        """(R, R▷) bitmasks for the first ``length`` low events of attack ``a`` at memory ``mi``."""
        anchor = self.info(a, mode)[mi]
        length = self._clip(anchor, length)
        key = ("control", mi, mode, anchor.low, length)
        got = self._mask_cache.get(key)
        if got is not None:
            return got
        # the lengths the robustness loop asks for, computed together
        wanted = {length}
        for pos in anchor.releases:
            wanted.update((pos, pos + 1))
        wanted = sorted(wanted)
        useful, others = self._others(mi, mode, wanted[-1])
        kept = _kept(anchor, wanted[-1], useful)
        c_lengths = tuple(sum(1 for j in kept if j < L) for L in wanted)
        c_events = tuple(anchor.low[j] for j in kept)
        c_mand = frozenset(k for k, j in enumerate(kept) if j in anchor.releases)
        ckey = ("ccontrol", mi, mode, c_events, c_mand, c_lengths)
        masks = self._mask_cache.get(ckey)
        if masks is None:
            prepared = _prepare_anchor(c_events, c_mand, c_lengths)
            masks = [[0, 0] for _ in wanted]
            for horizon, mask, other in others:
                for k, q in enumerate(_match(prepared, other)):
                    if q is None:
                        continue
                    masks[k][0] |= mask
                    if q <= horizon:
                        masks[k][1] |= mask
            self._mask_cache[ckey] = masks
        for L, (r, rc) in zip(wanted, masks):
            self._mask_cache[("control", mi, mode, anchor.low, L)] = (r, rc)
        return self._mask_cache[key]

    def _others(self, mi: int, mode: str, top: int) -> tuple:
        """Release events at ``mi`` and the distinct compressed runs.

        An optional (non-release) position only matters for similarity if its
        event equals a release event of some run: a matched pair of two
        optional positions can always be dropped. Everything else is removed,
        which merges runs that differ only in such events (e.g. the attack's
        own assignments). Entries are (release horizon, attack mask, prepared
        sequence) in compressed positions.
        """
        groups = self.groups(mi, mode)
        if all(inf.low.length != math.inf for inf, _ in groups):
            top = None
        key = ("others", mi, mode, top)
        got = self._mask_cache.get(key)
        if got is None:
            useful = frozenset(inf.low[p] for inf, _ in groups for p in inf.releases)
            merged: dict = {}
            for inf, mask in groups:
                kept = _kept(inf, _bound(inf, top or 0), useful)
                events = tuple(inf.low[j] for j in kept)
                mand = frozenset(k for k, j in enumerate(kept) if j in inf.releases)
                h = inf.horizon
                horizon = -1 if h < 0 else sum(1 for j in kept if j < h)
                k = (events, mand, horizon)
                merged[k] = merged.get(k, 0) | mask
            entries = [(horizon, mask, _prepare_other(events, mand))
                       for (events, mand, horizon), mask in merged.items()]
            got = self._mask_cache[key] = (useful, entries)
        return got

    def attacker_control(self, mi: int, mode: str, a: int, length=math.inf) -> int:
        return self.control(mi, mode, a, length)[0]

    def release_control(self, mi: int, mode: str, a: int, length=math.inf) -> int:
        return self.control(mi, mode, a, length)[1]

    # -- irrelevant attacks
    def endorse_seqs(self, b: int) -> list:
        key = ("endorse", b)
        got = self._lows.get(key)
        if got is None:
            got = [endorse_events(r) for r in self.runs(b)]
            self._lows[key] = got
        return got

    def checked_seqs(self, b: int) -> list:
        key = ("checked", b)
        got = self._lows.get(key)
        if got is None:
            got = [checked_events(r) for r in self.runs(b)]
            self._lows[key] = got
        return got

    def trusted_seqs(self, b: int) -> list:
        key = ("trusted", b)
        got = self._lows.get(key)
        if got is None:
            env = self.program.env
            got = [trusted_projection(r, env) for r in self.runs(b)]
            self._lows[key] = got
        return got

    def irrelevant(self, mi: int, endorsed: UPSeq) -> int:
        """Attacks whose endorse events first depart from ``endorsed`` by a different value."""
        key = ("omega", mi, endorsed)
        got = self._mask_cache.get(key)
        if got is None:
            got = 0
            for b in range(len(self.universe)):
                if direct_irrelevant(endorsed, self.endorse_seqs(b)[mi]):
                    got |= 1 << b
            self._mask_cache[key] = got
        return got

    def irrelevant_checked(self, mi: int, checked: UPSeq) -> int:
        key = ("omega_hat", mi, checked)
        got = self._mask_cache.get(key)
        if got is None:
            got = 0
            for b in range(len(self.universe)):
                if checked_irrelevant(checked, self.checked_seqs(b)[mi]):
                    got |= 1 << b
            self._mask_cache[key] = got
        return got


def release_info(s: UPSeq, others: Sequence[UPSeq], mode: str) -> ReleaseInfo:
    n = s.length
    agrees = tuple((s.agree(o), o.length, _terminated(o)) for o in others)
    # divergence is never an event of a finite trace: it only feeds the
    # divergence clause of release control, not the release positions
    rel = sorted({a for a, ln, _ in agrees if a < n and (mode == PS or ln > a) and s[a] != DIV})
    return ReleaseInfo(s, tuple(rel), tuple(s[L] for L in rel), agrees, mode)


def similar_prefix(a: ReleaseInfo, length: int, b: ReleaseInfo, fixed: bool = False):
    """Shortest prefix of ``b``'s low sequence similar to the first ``length`` events of ``a``.

    Two low sequences are similar when each can be cut into segments,
    cutting at least at every release position, such that the events at the
    cuts coincide pairwise. Non-release positions may be cut as well, so this
    is a subsequence match in which releases on either side are mandatory.
    Returns the prefix length, or None. With ``fixed`` the whole of ``b``
    (which must be finite) has to be used.
    """
    return similar_prefixes(a, (int(length),), b, fixed)[0]


def similar_prefixes(a: ReleaseInfo, lengths: Sequence[int], b: ReleaseInfo, fixed: bool = False) -> list:
    """:func:`similar_prefix` for several prefix lengths of ``a`` in one pass."""
    top = max(lengths)
    if fixed and b.low.length == math.inf:
        raise ValueError("fixed similarity needs a finite sequence")
    anchor = _prepare_anchor(tuple(a.low[i] for i in range(top)), frozenset(a.releases), lengths)
    bound = _bound(b, top)
    other = _prepare_other(tuple(b.low[j] for j in range(bound)), frozenset(b.releases))
    return _match(anchor, other, fixed)


def _bound(b: ReleaseInfo, top: int) -> int:
    """Positions of ``b`` that can take part in matching ``top`` events of an anchor."""
    B = b.low
    if B.length == math.inf:
        return len(B.prefix) + max(b.releases, default=-1) + 1 + (top + 1) * max(len(B.cycle), 1)
    return int(B.length)


def _kept(inf: ReleaseInfo, upto: int, useful: frozenset) -> list:
    return [j for j in range(upto) if j in inf.releases or inf.low[j] in useful]


def _prepare_anchor(events: tuple, mandatory_at: frozenset, lengths: Sequence[int]) -> tuple:
    top = max(lengths)
    mandatory = 0
    eq: dict = {}
    for i in range(top):
        ev = events[i]
        if i in mandatory_at:
            mandatory |= 1 << i
        if ev != DIV:
            eq[ev] = eq.get(ev, 0) | (1 << i)
    optional = ((1 << top) - 1) & ~mandatory
    # for length L: success once some bit i with last mandatory < i <= L is reachable
    windows = []
    for L in lengths:
        lo = (mandatory & ((1 << L) - 1)).bit_length()
        windows.append(((1 << (L + 1)) - 1) & ~((1 << lo) - 1))
    return tuple(lengths), optional, eq, tuple(windows)


def _prepare_other(events: tuple, mandatory_at: frozenset) -> tuple:
    free = 0  # positions that may be skipped
    for j in range(len(events)):
        if j not in mandatory_at:
            free |= 1 << j
    return events, free, len(events)


def _match(anchor: tuple, other: tuple, fixed: bool = False) -> list:
    """Forward DP over the other sequence's positions.

    After ``j`` of its events the bitmask ``reach`` has bit ``i`` set when the
    anchor's first ``i`` events can be consumed. Bits up to ``L`` only depend
    on the anchor's first ``L`` events, so one pass answers every length.
    """
    lengths, optional, eq, windows = anchor
    events, free, bound = other
    out = [None] * len(lengths)
    pending = list(range(len(lengths)))
    reach = 1
    j = 0
    while True:
        while True:
            nxt = reach | ((reach & optional) << 1)
            if nxt == reach:
                break
            reach = nxt
        if fixed:
            if j == bound:
                return [j if reach & (1 << L) else None for L in lengths]
        else:
            hit = [k for k in pending if reach & windows[k]]
            if hit:
                for k in hit:
                    out[k] = j
                pending = [k for k in pending if k not in hit]
                if not pending:
                    return out
        if j >= bound or not reach:
            return out
        step = (reach & eq.get(events[j], 0)) << 1
        if (free >> j) & 1:
            step |= reach
        reach = step
        j += 1


def direct_irrelevant(endorsed: UPSeq, other: UPSeq) -> bool:
    d = endorsed.agree(other)
    if d == math.inf or d >= endorsed.length or d >= other.length:
        return False
    (la, va), (lb, vb) = endorsed[d], other[d]
    return la == lb and va != vb


def checked_irrelevant(checked: UPSeq, other: UPSeq) -> bool:
    d = checked.agree(other)
    if d == math.inf or d >= checked.length or d >= other.length:
        return False
    (la, va, ba), (lb, vb, bb) = checked[d], other[d]
    return la == lb and va != vb and ba + bb >= 1


def bits(mask: int) -> list:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out

