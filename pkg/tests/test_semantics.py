import itertools

import pytest
from hypothesis import given, settings, strategies as st

from robustcheck.attacks import substitute
from robustcheck.lattice import PT, PU, ST, SU
from robustcheck.parser import parse_command, parse_program
from robustcheck.semantics import (
    DIV, PI, PS, TERM, Machine, RunResult, UPSeq, apply_op, assign_event, checked_event,
    dump_trace, eval_expr, events_until_low, low_projection, memories, run, run_small_step,
    step, trusted_projection,
)
from robustcheck.syntax import (
    HALT, Assign, BinOp, Bracket, CheckedEndorse, Const, Declassify, If, SecurityEnv, Seq, Skip,
    Var, While, seq,
)

from conftest import load


# -------------------------------------------------------------- expressions

def test_eval_examples():
    assert eval_expr(Const(7), {}, 8) == 7
    assert eval_expr(Var("x"), {"x": 3}, 8) == 3
    assert eval_expr(BinOp("<", Var("u"), Var("h")), {"u": 5, "h": 7}, 8) == 1


def test_arithmetic_wraps():
    # brute-force table against Python's own modular arithmetic
    for n in (2, 3, 4):
        for a, b in itertools.product(range(n), repeat=2):
            assert apply_op("+", a, b, n) == (a + b) % n
            assert apply_op("-", a, b, n) == (a - b) % n
            assert apply_op("*", a, b, n) == (a * b) % n
            assert apply_op("&&", a, b, n) == int(bool(a) and bool(b))
            assert apply_op("||", a, b, n) == int(bool(a) or bool(b))
    assert eval_expr(Const(9), {}, 8) == 1


@given(st.integers(0, 3), st.integers(0, 3))
def test_declassify_is_transparent(a, b):
    m = {"x": a, "y": b}
    e = BinOp("-", Var("x"), Var("y"))
    assert eval_expr(Declassify(e), m, 4) == eval_expr(e, m, 4)


# ------------------------------------------------------------------- steps

def test_step_assign():
    c, m, ev = step(Assign("x", Const(2)), {"x": 0}, 4)
    assert (c, m, ev) == (HALT, {"x": 2}, assign_event("x", 2))


def test_step_checked_endorse_false_branch():
    cmd = CheckedEndorse("L", "x", BinOp("==", Var("u"), Var("u'")), Assign("x", Const(1)), Skip())
    m = {"x": 5, "u": 1, "u'": 0}
    c, m2, ev = step(cmd, m, 8)
    assert c == Skip() and m2 == m
    assert ev == checked_event("x", "L", 5, 0)
    assert (ev.label, ev.value, ev.bit) == ("L", 5, 0)


def test_step_while_exit_is_silent():
    c, m, ev = step(While(Const(0), Skip()), {"x": 1}, 4)
    assert (c, m, ev) == (HALT, {"x": 1}, None)


def test_step_bracket_tags_attack_events():
    c, m, ev = step(Bracket(Assign("u", Const(1))), {"u": 0}, 4)
    assert ev.in_attack and c == Bracket(HALT)
    assert step(c, m, 4) == (HALT, m, None)


def test_step_hole_rejected():
    p = parse_program("var u: public untrusted; [#]")
    with pytest.raises(ValueError):
        step(p.body, {"u": 0}, 4)


# -------------------------------------------------------------------- runs

def test_run_skip():
    r = run(Skip(), {}, 4)
    assert r.terminated and r.prefix == ()
    assert dump_trace(r) == TERM


def test_run_knowledge_example():
    p = load("knowledge_growth")
    r = Machine(p.body, p.env.variables, 8).run((7, 0))
    assert low_projection(r, p.env) == UPSeq((("l", 0), ("l", 7), TERM))


def test_run_self_loop():
    r = run(While(Const(1), Skip()), {}, 4)
    assert r.diverged and r.prefix == () and r.lasso == ()


def test_run_lasso_with_events():
    r = run(seq(Assign("x", Const(0)), While(Const(1), Assign("x", BinOp("+", Var("x"), Const(1))))),
            {"x": 0}, 3)
    assert r.diverged
    assert [e.value for e in r.events.take(7)] == [0, 1, 2, 0, 1, 2, 0]


# -------------------------------------------------------------- projections

ENV = SecurityEnv((("h", ST), ("l", PT), ("u", PU), ("s", SU), ("t", PT)))


def _ev(x, v):
    return assign_event(x, v)


def test_low_projection_drops_secrets():
    tr = [_ev("h", 5), _ev("l", 1), TERM]
    assert low_projection(tr, ENV) == UPSeq((("l", 1), TERM))


def test_low_projection_divergence_only_in_ps():
    tr = [_ev("l", 0), DIV]
    assert low_projection(tr, ENV, PI) == UPSeq((("l", 0),))
    assert low_projection(tr, ENV, PS) == UPSeq((("l", 0), DIV))


def test_low_projection_drops_checked_events():
    tr = [checked_event("u", "k", 1, 1), _ev("l", 2)]
    assert low_projection(tr, ENV) == UPSeq((("l", 2),))


def test_trusted_projection():
    assert trusted_projection([_ev("u", 1), _ev("t", 3), TERM], ENV) == UPSeq((("t", 3), TERM))
    assert trusted_projection([_ev("u", 2)], ENV) == UPSeq(())


def test_fair_attack_segment_has_no_trusted_events():
    p = load("threshold")
    a = (parse_command("u := 5", p.env),)
    r = Machine(substitute(p, a), p.env.variables, p.domain).run((0, 7, 0))
    attack_events = [e for e in r.prefix if e.in_attack]
    assert attack_events and trusted_projection(attack_events, p.env) == UPSeq(())


def test_internal_variables_are_unobservable():
    env = ENV.extend("__chk_x_0", PT, internal=True)
    assert low_projection([_ev("__chk_x_0", 1), TERM], env) == UPSeq((TERM,))
    assert trusted_projection([_ev("__chk_x_0", 1), TERM], env) == UPSeq((TERM,))


def test_events_until_low():
    p = parse_program("var h: secret trusted; var l: public trusted; h := 1; l := 2; h := 3; l := 4")
    r = Machine(p.body, p.env.variables, 8).run((0, 0))
    assert [e.value for e in events_until_low(r, p.env, 1)] == [1, 2, 3, 4]
    assert events_until_low(r, p.env, 2) == r.events


# -------------------------------------------------------------------- UPSeq

def test_upseq_normalizes_rotations():
    assert UPSeq((1, 2), (3, 2)) == UPSeq((1,), (2, 3))
    assert UPSeq((), (1, 1, 1)) == UPSeq((), (1,))


@given(st.lists(st.integers(0, 2), max_size=4), st.lists(st.integers(0, 2), min_size=1, max_size=3),
       st.lists(st.integers(0, 2), max_size=4), st.lists(st.integers(0, 2), max_size=3))
def test_upseq_agree_matches_unrolling(p1, c1, p2, c2):
    a, b = UPSeq(p1, c1), UPSeq(p2, c2)
    k = a.agree(b)
    horizon = 40
    xs, ys = a.take(horizon), b.take(horizon)
    brute = next((i for i in range(min(len(xs), len(ys))) if xs[i] != ys[i]), min(len(xs), len(ys)))
    if k == float("inf"):
        assert brute == horizon
    else:
        assert k == brute


# ------------------------------------------------- machine vs small-step

VARS = ["h", "l", "u"]
exprs = st.recursive(
    st.one_of(st.sampled_from(VARS).map(Var), st.integers(0, 3).map(Const)),
    lambda sub: st.builds(BinOp, st.sampled_from(["+", "-", "*", "==", "<", "&&"]), sub, sub),
    max_leaves=4)
commands = st.recursive(
    st.one_of(st.just(Skip()), st.builds(Assign, st.sampled_from(VARS), exprs)),
    lambda sub: st.one_of(
        st.builds(lambda a, b: seq(a, b), sub, sub),
        st.builds(If, exprs, sub, sub),
        st.builds(While, exprs, sub),
        st.builds(lambda e, a, b: CheckedEndorse("k", "u", e, a, b), exprs, sub, sub),
        st.builds(Bracket, sub)),
    max_leaves=6)


@settings(max_examples=300, deadline=None)
@given(commands, st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_machine_agrees_with_small_step(c, values):
    m = dict(zip(VARS, values))
    fast = Machine(c, VARS, 3).run(values)
    slow = run_small_step(c, m, 3)
    assert fast.same_behaviour(slow)


@settings(max_examples=200, deadline=None)
@given(commands, st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_lasso_replays(c, values):
    machine = Machine(c, VARS, 3)
    r = machine.run(values)
    if r.diverged:
        pc, mem = r.entry
        k = machine.cycle_steps(r.entry)
        assert machine.simulate(pc, mem, 3 * k) == list(r.lasso) * 3


@settings(max_examples=100, deadline=None)
@given(commands, st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_runs_are_deterministic(c, values):
    assert Machine(c, VARS, 3).run(values) == Machine(c, VARS, 3).run(values)


@given(exprs, st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_checked_bit_follows_guard(e, values):
    m = dict(zip(VARS, values))
    _, _, ev = step(CheckedEndorse("k", "u", e, Skip(), Skip()), m, 3)
    assert ev.bit == int(eval_expr(e, m, 3) != 0)
    assert ev.value == m["u"]


def test_memories_enumeration():
    ms = list(memories(["a", "b"], 3, {"b": 1}))
    assert ms == [{"a": 0, "b": 1}, {"a": 1, "b": 1}, {"a": 2, "b": 1}]


def test_run_result_terminal_flags():
    assert RunResult("terminated", ()).terminated
    assert RunResult("diverged", (), ()).diverged
