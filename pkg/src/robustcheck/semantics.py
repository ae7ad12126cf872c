"""Expression evaluation, small-step command semantics and exact whole runs.

Values live in ``0..N-1``; arithmetic wraps modulo ``N`` and comparisons
yield 0/1. A run either terminates or revisits a ``(command, memory)``
configuration, in which case it is reported as a lasso: the events before
the cycle entry plus the events of one cycle period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .syntax import (
    HALT, Assign, BinOp, Bracket, CheckedEndorse, Command, Const, Declassify,
    Endorse, Expr, Halt, Hole, If, Program, SecurityEnv, Seq, Skip, Var, While,
)

TERM = "⇓"
DIV = "⇑"
PS, PI = "ps", "pi"


def apply_op(op: str, a: int, b: int, n: int) -> int:
    match op:
        case "+":
            return (a + b) % n
        case "-":
            return (a - b) % n
        case "*":
            return (a * b) % n
        case "==":
            return int(a == b)
        case "!=":
            return int(a != b)
        case "<":
            return int(a < b)
        case "<=":
            return int(a <= b)
        case ">":
            return int(a > b)
        case ">=":
            return int(a >= b)
        case "&&":
            return int(a != 0 and b != 0)
        case "||":
            return int(a != 0 or b != 0)
    raise ValueError(f"unknown operator {op}")


def eval_expr(e: Expr, m: Mapping[str, int], n: int) -> int:
    match e:
        case Const(v):
            return v % n
        case Var(name):
            return m[name]
        case BinOp(op, l, r):
            return apply_op(op, eval_expr(l, m, n), eval_expr(r, m, n), n)
        case Declassify(inner):
            return eval_expr(inner, m, n)
    raise TypeError(e)


# --------------------------------------------------------------------- events

class Event(NamedTuple):
    kind: str  # "assign" | "endorse" | "checked"
    var: str
    value: int
    label: Optional[str] = None
    bit: Optional[int] = None
    in_attack: bool = False

    def __str__(self) -> str:
        match self.kind:
            case "assign":
                s = f"({self.var}, {self.value})"
            case "endorse":
                s = f"endorse({self.label}, {self.value})"
            case _:
                s = f"checked({self.label}, {self.value}, {self.bit})"
        return f"[a] {s}" if self.in_attack else s


def assign_event(x, v, in_attack=False) -> Event:
    return Event("assign", x, v, in_attack=in_attack)


def endorse_event(x, label, v) -> Event:
    return Event("endorse", x, v, label)


def checked_event(x, label, v, b) -> Event:
    return Event("checked", x, v, label, b)


# ------------------------------------------------------------ small-step rules

def step(c: Command, m: Mapping[str, int], n: int) -> tuple:
    """One transition ``<c, m> -ev-> <c', m'>``; ``ev`` is None for silent steps."""
    match c:
        case Skip():
            return HALT, m, None
        case Assign(x, e):
            v = eval_expr(e, m, n)
            return HALT, {**m, x: v}, assign_event(x, v)
        case Endorse(x, label, e):
            v = eval_expr(e, m, n)
            return HALT, {**m, x: v}, endorse_event(x, label, v)
        case Seq(c1, c2):
            c1p, mp, ev = step(c1, m, n)
            return (c2 if isinstance(c1p, Halt) else Seq(c1p, c2)), mp, ev
        case If(e, c1, c2):
            return (c1 if eval_expr(e, m, n) != 0 else c2), m, None
        case While(e, body):
            if eval_expr(e, m, n) != 0:
                return Seq(body, c), m, None
            return HALT, m, None
        case CheckedEndorse(label, x, e, c1, c2):
            b = int(eval_expr(e, m, n) != 0)
            return (c1 if b else c2), m, checked_event(x, label, m[x], b)
        case Bracket(Halt()):
            return HALT, m, None
        case Bracket(a):
            ap, mp, ev = step(a, m, n)
            if ev is not None:
                ev = ev._replace(in_attack=True)
            return Bracket(ap), mp, ev
        case Hole():
            raise ValueError("cannot step a program with unfilled holes")
        case Halt():
            raise ValueError("halt does not step")
    raise TypeError(c)


# ------------------------------------------------------- ultimately periodic

class UPSeq:
    """An ultimately periodic sequence ``prefix . cycle^omega`` (finite if cycle is empty)."""

    __slots__ = ("prefix", "cycle")

    def __init__(self, prefix: Sequence = (), cycle: Sequence = ()):
        prefix, cycle = tuple(prefix), tuple(cycle)
        if cycle:
            # minimal period
            k = len(cycle)
            for d in range(1, k + 1):
                if k % d == 0 and cycle == cycle[:d] * (k // d):
                    cycle = cycle[:d]
                    break
            # shortest preperiod
            while prefix and prefix[-1] == cycle[-1]:
                prefix = prefix[:-1]
                cycle = cycle[-1:] + cycle[:-1]
        self.prefix = prefix
        self.cycle = cycle

    @property
    def finite(self) -> bool:
        return not self.cycle

    @property
    def length(self):
        return len(self.prefix) if not self.cycle else math.inf

    def __getitem__(self, i: int):
        if i < len(self.prefix):
            return self.prefix[i]
        if not self.cycle:
            raise IndexError(i)
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def take(self, k) -> tuple:
        if k == math.inf:
            if self.cycle:
                raise ValueError("infinite sequence")
            return self.prefix
        k = int(k)
        if k <= len(self.prefix):
            return self.prefix[:k]
        if not self.cycle:
            return self.prefix
        extra = k - len(self.prefix)
        reps = -(-extra // len(self.cycle))
        return self.prefix + (self.cycle * reps)[:extra]

    def agree(self, other: UPSeq):
        """Length of the longest common prefix (``math.inf`` if equal)."""
        if self.cycle and other.cycle:
            limit = max(len(self.prefix), len(other.prefix)) + math.lcm(len(self.cycle), len(other.cycle))
        else:
            limit = min(self.length, other.length)
        for i in range(int(limit)):
            if self[i] != other[i]:
                return i
        if self.cycle and other.cycle:
            return math.inf
        return int(limit)

    def has_prefix(self, items: Sequence) -> bool:
        return self.agree(UPSeq(items)) >= len(items)

    def __eq__(self, other) -> bool:
        return isinstance(other, UPSeq) and self.prefix == other.prefix and self.cycle == other.cycle

    def __hash__(self) -> int:
        return hash((self.prefix, self.cycle))

    def __len__(self) -> int:
        if self.cycle:
            raise TypeError("infinite sequence has no len()")
        return len(self.prefix)

    def __iter__(self):
        if self.cycle:
            raise TypeError("cannot iterate an infinite sequence")
        return iter(self.prefix)

    def __repr__(self) -> str:
        if self.cycle:
            return f"UPSeq({list(self.prefix)!r} + {list(self.cycle)!r}^ω)"
        return f"UPSeq({list(self.prefix)!r})"

    def map_filter(self, fn) -> UPSeq:
        """Apply ``fn`` to every element, dropping those mapped to None."""
        pre = tuple(y for y in map(fn, self.prefix) if y is not None)
        cyc = tuple(y for y in map(fn, self.cycle) if y is not None)
        return UPSeq(pre, cyc)


# ----------------------------------------------------------------------- runs

@dataclass(frozen=True)
class RunResult:
    kind: str  # "terminated" | "diverged"
    prefix: tuple  # events before the cycle entry (all events if terminated)
    lasso: tuple = ()  # events of one cycle period
    entry: object = None  # configuration at cycle entry, for replay

    @property
    def terminated(self) -> bool:
        return self.kind == "terminated"

    @property
    def diverged(self) -> bool:
        return self.kind == "diverged"

    @property
    def events(self) -> UPSeq:
        return UPSeq(self.prefix, self.lasso)

    def same_behaviour(self, other: RunResult) -> bool:
        return self.kind == other.kind and self.events == other.events


def run_small_step(c: Command, m: Mapping[str, int], n: int, limit: int = 10**6) -> RunResult:
    """Run by iterating :func:`step`, detecting repeated configurations."""
    seen: dict = {}
    evs: list = []
    cur, mem = c, dict(m)
    for _ in range(limit):
        if isinstance(cur, Halt):
            return RunResult("terminated", tuple(evs))
        key = (cur, tuple(sorted(mem.items())))
        if key in seen:
            start = seen[key]
            return RunResult("diverged", tuple(evs[:start]), tuple(evs[start:]), (cur, dict(mem)))
        seen[key] = len(evs)
        cur, mem, ev = step(cur, mem, n)
        if ev is not None:
            evs.append(ev)
    raise RuntimeError("step limit exceeded")


# ----------------------------------------------------------- compiled machine

def compile_expr(e: Expr, index: Mapping[str, int], n: int):
    match e:
        case Const(v):
            v = v % n
            return lambda m: v
        case Var(name):
            i = index[name]
            return lambda m: m[i]
        case Declassify(inner):
            return compile_expr(inner, index, n)
        case BinOp(op, l, r):
            fl, fr = compile_expr(l, index, n), compile_expr(r, index, n)
            match op:
                case "+":
                    return lambda m: (fl(m) + fr(m)) % n
                case "-":
                    return lambda m: (fl(m) - fr(m)) % n
                case "*":
                    return lambda m: (fl(m) * fr(m)) % n
                case "==":
                    return lambda m: int(fl(m) == fr(m))
                case "!=":
                    return lambda m: int(fl(m) != fr(m))
                case "<":
                    return lambda m: int(fl(m) < fr(m))
                case "<=":
                    return lambda m: int(fl(m) <= fr(m))
                case ">":
                    return lambda m: int(fl(m) > fr(m))
                case ">=":
                    return lambda m: int(fl(m) >= fr(m))
                case "&&":
                    return lambda m: int(fl(m) != 0 and fr(m) != 0)
                case "||":
                    return lambda m: int(fl(m) != 0 or fr(m) != 0)
    raise TypeError(e)


_SKIP, _ASSIGN, _ENDORSE, _BRANCH, _CHECKED = range(5)
_HALT = -1


class Machine:
    """A hole-free command compiled to a flat control-flow graph.

    Memories are tuples ordered like ``variables``. Runs are observably
    identical to :func:`run_small_step` (same events, same divergence).
    """

    def __init__(self, c: Command, variables: Sequence[str], n: int):
        self.variables = tuple(variables)
        self.index = {x: i for i, x in enumerate(self.variables)}
        self.n = n
        self.nodes: list = []
        self.entry = self._compile(c, _HALT, False)

    def _new(self, node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def _compile(self, c: Command, nxt: int, attack: bool) -> int:
        ix, n = self.index, self.n
        match c:
            case Skip() | Halt():
                return self._new([_SKIP, nxt])
            case Assign(x, e):
                return self._new([_ASSIGN, ix[x], compile_expr(e, ix, n), nxt, x, attack])
            case Endorse(x, label, e):
                return self._new([_ENDORSE, ix[x], compile_expr(e, ix, n), nxt, x, label, attack])
            case Seq(a, b):
                return self._compile(a, self._compile(b, nxt, attack), attack)
            case If(e, a, b):
                return self._new([_BRANCH, compile_expr(e, ix, n),
                                  self._compile(a, nxt, attack), self._compile(b, nxt, attack)])
            case While(e, body):
                w = self._new([_BRANCH, compile_expr(e, ix, n), None, nxt])
                self.nodes[w][2] = self._compile(body, w, attack)
                return w
            case CheckedEndorse(label, x, e, a, b):
                return self._new([_CHECKED, compile_expr(e, ix, n), self._compile(a, nxt, attack),
                                  self._compile(b, nxt, attack), ix[x], x, label, attack])
            case Bracket(body):
                # the silent exit step ([halt] -> halt) belongs to the host program
                return self._compile(body, self._new([_SKIP, nxt]), True)
            case Hole():
                raise ValueError("cannot run a program with unfilled holes")
        raise TypeError(c)

    def _step(self, pc: int, mem: tuple):
        node = self.nodes[pc]
        kind = node[0]
        if kind == _SKIP:
            return node[1], mem, None
        if kind == _ASSIGN:
            v = node[2](mem)
            i = node[1]
            return node[3], mem[:i] + (v,) + mem[i + 1:], Event("assign", node[4], v, None, None, node[5])
        if kind == _ENDORSE:
            v = node[2](mem)
            i = node[1]
            return node[3], mem[:i] + (v,) + mem[i + 1:], Event("endorse", node[4], v, node[5], None, node[6])
        if kind == _BRANCH:
            return (node[2] if node[1](mem) != 0 else node[3]), mem, None
        b = int(node[1](mem) != 0)
        return (node[2] if b else node[3]), mem, Event("checked", node[5], mem[node[4]], node[6], b, node[7])

    def run(self, mem: tuple) -> RunResult:
        seen: dict = {}
        evs: list = []
        pc = self.entry
        step_ = self._step
        while pc != _HALT:
            key = (pc, mem)
            at = seen.get(key)
            if at is not None:
                return RunResult("diverged", tuple(evs[:at]), tuple(evs[at:]), key)
            seen[key] = len(evs)
            pc, mem, ev = step_(pc, mem)
            if ev is not None:
                evs.append(ev)
        return RunResult("terminated", tuple(evs))

    def simulate(self, pc: int, mem: tuple, steps: int) -> list:
        """Events of ``steps`` transitions from an arbitrary configuration."""
        out = []
        for _ in range(steps):
            if pc == _HALT:
                break
            pc, mem, ev = self._step(pc, mem)
            if ev is not None:
                out.append(ev)
        return out

    def cycle_steps(self, entry) -> int:
        """Number of transitions in one period of the cycle starting at ``entry``."""
        pc, mem = entry
        k = 0
        while True:
            pc, mem, _ = self._step(pc, mem)
            k += 1
            if (pc, mem) == entry:
                return k


def run(c: Command, m: Mapping[str, int], n: int, variables: Sequence[str] | None = None) -> RunResult:
    variables = tuple(variables) if variables is not None else tuple(m)
    return Machine(c, variables, n).run(tuple(m[x] for x in variables))


def run_program(p: Program, m: Mapping[str, int]) -> RunResult:
    if p.hole_count:
        raise ValueError("substitute attacks before running")
    return run(p.body, m, p.domain, p.env.variables)


# ----------------------------------------------------------------- projections

def _as_run(tr) -> RunResult:
    if isinstance(tr, RunResult):
        return tr
    items = list(tr)
    if items and items[-1] == TERM:
        return RunResult("terminated", tuple(items[:-1]))
    if items and items[-1] == DIV:
        return RunResult("diverged", tuple(items[:-1]))
    # an unfinished trace: no terminal marker
    return RunResult("partial", tuple(items))


def low_event(ev: Event, env: SecurityEnv):
    if ev.kind != "checked" and ev.var in env.observable_low:
        return (ev.var, ev.value)
    return None


def trusted_event(ev: Event, env: SecurityEnv):
    if ev.kind != "checked" and ev.var in env.observable_trusted:
        return (ev.var, ev.value)
    return None


def low_projection(tr, env: SecurityEnv, mode: str = PS) -> UPSeq:
    """Low events of a run; ``⇓`` closes terminated runs, ``⇑`` silent divergence (PS only)."""
    r = _as_run(tr)
    seq_ = r.events.map_filter(lambda ev: low_event(ev, env))
    if r.terminated:
        return UPSeq(seq_.prefix + (TERM,))
    if r.diverged and seq_.finite and mode == PS:
        return UPSeq(seq_.prefix + (DIV,))
    return seq_


def trusted_projection(tr, env: SecurityEnv) -> UPSeq:
    r = _as_run(tr)
    seq_ = r.events.map_filter(lambda ev: trusted_event(ev, env))
    if r.terminated:
        return UPSeq(seq_.prefix + (TERM,))
    return seq_


def endorse_events(tr) -> UPSeq:
    return _as_run(tr).events.map_filter(lambda ev: (ev.label, ev.value) if ev.kind == "endorse" else None)


def checked_events(tr) -> UPSeq:
    return _as_run(tr).events.map_filter(
        lambda ev: (ev.label, ev.value, ev.bit) if ev.kind == "checked" else None)


def format_low(ev) -> str:
    return ev if isinstance(ev, str) else f"({ev[0]}, {ev[1]})"


def dump_trace(r: RunResult) -> str:
    """One event per line; attack events carry an ``[a]`` prefix."""
    lines = [str(ev) for ev in r.prefix]
    if r.terminated:
        lines.append(TERM)
    else:
        lines.append("-- cycle --")
        lines.extend(str(ev) for ev in r.lasso)
        lines.append(DIV)
    return "\n".join(lines)


def dump_lines(r: RunResult) -> list:
    return dump_trace(r).split("\n")


def events_until_low(r: RunResult, env: SecurityEnv, low_index: int, mode: str = PS):
    """Events of ``r`` up to and including the one producing low event ``low_index``.

    Terminal markers stand for the whole run, returned as a :class:`UPSeq`.
    """
    low = low_projection(r, env, mode)
    if low[low_index] in (TERM, DIV):
        return r.events
    count = -1
    evs = r.events
    i = 0
    while True:
        ev = evs[i]
        if low_event(ev, env) is not None:
            count += 1
            if count == low_index:
                return UPSeq(evs.take(i + 1))
        i += 1


def events_until_trusted(r: RunResult, env: SecurityEnv, index: int):
    tr = trusted_projection(r, env)
    if tr[index] == TERM:
        return r.events
    count = -1
    evs = r.events
    i = 0
    while True:
        ev = evs[i]
        if trusted_event(ev, env) is not None:
            count += 1
            if count == index:
                return UPSeq(evs.take(i + 1))
        i += 1


def memories(variables: Sequence[str], n: int, fixed: Mapping[str, int] | None = None) -> Iterable[dict]:
    import itertools
    fixed = fixed or {}
    free = [x for x in variables if x not in fixed]
    for vals in itertools.product(range(n), repeat=len(free)):
        m = dict(fixed)
        m.update(zip(free, vals))
        yield {x: m[x] for x in variables}
