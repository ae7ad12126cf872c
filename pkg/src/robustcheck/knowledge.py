"""Attacker knowledge over finite memory spaces.

The public functions here work directly from the definitions: they run the
program from every memory that agrees with the given public part and filter
by low-event prefixes. :class:`MemorySpace` provides the (optionally
liveness-reduced) memory enumeration used by the bulk engine.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

from .semantics import (
    DIV, PI, PS, Machine, RunResult, UPSeq, low_projection,
)
from .syntax import (
    Assign, Bracket, CheckedEndorse, Command, Endorse, If, Program, Seq, While,
    expr_vars,
)

Memory = tuple  # ((var, value), ...) in declaration order


def live_in(c: Command, out: frozenset) -> frozenset:
    """Variables whose entry value may influence the run of ``c``; holes are no-ops."""
    match c:
        case Assign(x, e) | Endorse(x, _, e):
            return (out - {x}) | expr_vars(e)
        case Seq(a, b):
            return live_in(a, live_in(b, out))
        case If(e, a, b):
            return frozenset(expr_vars(e)) | live_in(a, out) | live_in(b, out)
        case While(e, body):
            cur = frozenset(expr_vars(e)) | out
            while True:
                nxt = cur | live_in(body, cur)
                if nxt == cur:
                    return cur
                cur = nxt
        case CheckedEndorse(_, x, e, a, b):
            # the endorsed value is recorded in the checked event
            return frozenset(expr_vars(e)) | {x} | live_in(a, out) | live_in(b, out)
        case Bracket(body):
            return live_in(body, out)
    return out


def live_variables(c: Command) -> frozenset:
    return live_in(c, frozenset())


@dataclass(frozen=True)
class MemorySpace:
    """All initial memories of a program, grouped by their public part.

    With ``reduce=True`` only variables live at entry range over the domain;
    the rest are pinned to 0. Variables in ``program.initial`` are always
    pinned to their fixed value.
    """

    program: Program
    reduce: bool = True

    @cached_property
    def variables(self) -> tuple:
        return self.program.env.variables

    @cached_property
    def fixed(self) -> dict:
        fixed = dict(self.program.initial)
        if self.reduce:
            live = live_variables(self.program.body)
            for x in self.variables:
                if x not in live and x not in fixed:
                    fixed[x] = 0
        return fixed

    @cached_property
    def free(self) -> tuple:
        return tuple(x for x in self.variables if x not in self.fixed)

    @cached_property
    def memories(self) -> list:
        """Memories as value tuples ordered like ``variables``."""
        n = self.program.domain
        pos = {x: i for i, x in enumerate(self.variables)}
        base = [self.fixed.get(x, 0) for x in self.variables]
        free_pos = [pos[x] for x in self.free]
        out = []
        for vals in itertools.product(range(n), repeat=len(free_pos)):
            m = list(base)
            for i, v in zip(free_pos, vals):
                m[i] = v
            out.append(tuple(m))
        return out

    @cached_property
    def public_positions(self) -> tuple:
        env = self.program.env
        return tuple(i for i, x in enumerate(self.variables) if env[x].public)

    def public_key(self, mem: tuple) -> tuple:
        return tuple(mem[i] for i in self.public_positions)

    @cached_property
    def classes(self) -> dict:
        """public key -> list of memory indices (insertion order is deterministic)."""
        out: dict = {}
        for idx, mem in enumerate(self.memories):
            out.setdefault(self.public_key(mem), []).append(idx)
        return out

    @cached_property
    def class_of(self) -> list:
        out = [None] * len(self.memories)
        for key, members in self.classes.items():
            for i in members:
                out[i] = key
        return out

    @cached_property
    def index(self) -> dict:
        return {mem: i for i, mem in enumerate(self.memories)}

    def as_dict(self, mem: tuple) -> dict:
        return dict(zip(self.variables, mem))

    def normalize(self, m: Mapping[str, int]) -> tuple:
        """Project an arbitrary memory onto this space (pinned variables take their fixed value)."""
        n = self.program.domain
        return tuple(self.fixed[x] if x in self.fixed else m.get(x, 0) % n for x in self.variables)


def memory_tuple(p: Program, m: Mapping[str, int]) -> Memory:
    return tuple((x, m[x]) for x in p.env.variables)


def _class_memories(p: Program, m_public: Mapping[str, int]):
    """Every full memory that agrees with ``m_public`` on public variables."""
    env = p.env
    fixed = dict(p.initial)
    pub = [x for x in env.variables if env[x].public]
    for x in pub:
        if x not in fixed:
            fixed[x] = m_public[x] % p.domain
    free = [x for x in env.variables if x not in fixed]
    for vals in itertools.product(range(p.domain), repeat=len(free)):
        m = dict(fixed)
        m.update(zip(free, vals))
        yield {x: m[x] for x in env.variables}


def _runs(p: Program, m_public):
    if p.hole_count:
        raise ValueError("knowledge is defined for hole-free programs; substitute an attack first")
    machine = Machine(p.body, p.env.variables, p.domain)
    for m in _class_memories(p, m_public):
        yield m, machine.run(tuple(m[x] for x in p.env.variables))


def _lowseq(ell) -> UPSeq:
    return ell if isinstance(ell, UPSeq) else UPSeq(tuple(ell))


def knowledge(p: Program, m_public: Mapping[str, int], ell: Sequence, mode: str = PS) -> frozenset:
    """Memories agreeing with ``m_public`` whose low projection starts with ``ell``."""
    ell = _lowseq(ell)
    return frozenset(memory_tuple(p, m) for m, r in _runs(p, m_public)
                     if low_projection(r, p.env, mode).has_prefix(ell.prefix))


def progress_knowledge(p: Program, m_public: Mapping[str, int], ell: Sequence, mode: str = PS) -> frozenset:
    """Memories whose low projection extends ``ell`` by at least one more low event."""
    ell = _lowseq(ell)
    out = set()
    for m, r in _runs(p, m_public):
        low = low_projection(r, p.env, mode)
        # a divergence marker is not a further low event
        further = low_projection(r, p.env, PI).length > len(ell.prefix)
        if low.has_prefix(ell.prefix) and further:
            out.add(memory_tuple(p, m))
    return frozenset(out)


def divergence_knowledge(p: Program, m_public: Mapping[str, int], ell: Sequence) -> frozenset:
    """Memories that produce ``ell`` and then (eventually) diverge."""
    ell = _lowseq(ell)
    items = tuple(x for x in ell.prefix if x != DIV)
    out = set()
    for m, r in _runs(p, m_public):
        if r.diverged and low_projection(r, p.env, PS).has_prefix(items):
            out.add(memory_tuple(p, m))
    return frozenset(out)


def public_part(p: Program, m: Mapping[str, int]) -> dict:
    return {x: m[x] for x in p.env.variables if p.env[x].public}


def classify_release(p: Program, m: Mapping[str, int], prefix: Sequence, r, mode: str = PS) -> bool:
    """Is ``r`` (the low event following ``prefix`` in the run from ``m``) a release event?"""
    mp = public_part(p, m)
    prefix = tuple(prefix)
    after = knowledge(p, mp, prefix + (r,), mode)
    before = knowledge(p, mp, prefix, mode) if mode == PS else progress_knowledge(p, mp, prefix, mode)
    return before > after


def pini_segment(p: Program, m: Mapping[str, int], tr_from: Sequence, tr_to: Sequence, mode: str = PS) -> bool:
    """Progress-insensitive noninterference along the low events from ``tr_from`` to ``tr_to``."""
    mp = public_part(p, m)
    tr_to = tuple(tr_to)
    for i in range(len(tuple(tr_from)), len(tr_to)):
        if not progress_knowledge(p, mp, tr_to[:i], mode) <= knowledge(p, mp, tr_to[:i + 1], mode):
            return False
    return True


def release_indices(anchor: UPSeq, others: Sequence[UPSeq], mode: str = PS) -> list:
    """Release positions of ``anchor`` given the low sequences of its public class.

    A position ``L`` releases (PS) iff some class member agrees with the anchor
    on exactly ``L`` events; PI additionally needs that member to go on past ``L``.
    """
    n = anchor.length
    out = set()
    for other in others:
        a = anchor.agree(other)
        if a < n and (mode == PS or other.length > a):
            out.add(a)
    return sorted(out)


def low_run(r: RunResult, p: Program, mode: str) -> UPSeq:
    return low_projection(r, p.env, mode)

