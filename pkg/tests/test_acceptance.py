"""Acceptance suite: one test group per criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion (see conftest.py).
"""

from __future__ import annotations

import subprocess
import sys

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from robustcheck.attacks import (
    irrelevant_attacks, irrelevant_attacks_checked, is_fair, substitute, universe_for,
)
from robustcheck.control import attacker_control, engine_for, release_control, similar, similar_oracle
from robustcheck.corpus import corpus_files, parse_expectations, run_file
from robustcheck.errors import ScaleError
from robustcheck.knowledge import (
    MemorySpace, classify_release, knowledge, progress_knowledge, public_part,
)
from robustcheck.lattice import PT, ST
from robustcheck.parser import parse_command, parse_file
from robustcheck.robustness import check, check_robustness, check_robustness_checked, check_robustness_endorse
from robustcheck.semantics import DIV, PI, PS, Machine, low_projection, memories
from robustcheck.syntax import (
    Assign, BinOp, Const, Program, SecurityEnv, Skip, Var, While, seq, uses_checked, uses_endorse,
)
from robustcheck.transform import lower_checked
from robustcheck.typecheck import typecheck, well_typed

from conftest import CORPUS, load, prog

FILES = corpus_files(CORPUS)
IDS = [f.stem for f in FILES]


# ------------------------------------------------------------------ 1. verdicts

DECLS = """
var u : public untrusted;
var h : secret trusted;
var h' : secret trusted;
var h'' : secret trusted;
var low : public trusted;
var low' : public trusted;
"""

# (body, property, {mode: verdict})
VERDICTS = [
    ("[#]; low := u < h;", "robustness", {PS: "reject", PI: "reject"}),
    ("[#]; low := h; low' := u < h;", "robustness", {PS: "accept", PI: "accept"}),
    ("[#]; if (u > 0) { low := h }", "robustness", {PS: "reject", PI: "reject"}),
    ("[#]; while (u > 0) { skip } low := h;", "robustness", {PS: "accept"}),
    ("[#]; while (u > h) { skip } low := 1;", "robustness", {PS: "reject", PI: "accept"}),
    ("[#]; low := endorse(u < h);", "robustness-endorse", {PS: "accept"}),
    ("[#]; low := endorse(u); low' := u < h'';", "robustness-endorse", {PS: "accept"}),
    ("[#]; low := endorse(u < h); low' := u < h'';", "robustness-endorse", {PS: "reject"}),
    ("[#]; if (u > 0) { h' := endorse(u) } low := h' < h;", "robustness-endorse", {PS: "reject"}),
]


@pytest.mark.criterion(1, "corpus verdicts")
@pytest.mark.parametrize("body,prop,want", VERDICTS, ids=[v[0] for v in VERDICTS])
def test_c1_section_verdicts(body, prop, want):
    p = prog(DECLS + body, 8)
    for mode, verdict in want.items():
        assert check(p, prop, mode).status == verdict, mode


@pytest.mark.criterion(1, "corpus verdicts")
def test_c1_checked_counterexample():
    p = load("unendorsed_guard")
    assert p.domain == 8
    assert check_robustness_checked(p, PS).status == "reject"
    assert typecheck(p)[0].rule == "T-CHECKED"


@pytest.mark.criterion(1, "corpus verdicts")
@pytest.mark.parametrize("body,want", [
    ("var u : public untrusted; var t : public trusted; [#]; t := u;", "reject"),
    ("var u1 : public untrusted; var u2 : public untrusted; var t : public trusted;"
     " [#]; if (u1) { t := endorse(u2) }", "reject"),
    ("var u : public untrusted; var t : public trusted; [#]; t := endorse(u);", "accept"),
])
def test_c1_integrity(body, want):
    assert check(prog(body, 8), "integrity").status == want


@pytest.mark.criterion(1, "corpus verdicts")
@pytest.mark.parametrize("name", ["password_update", "embargo"])
def test_c1_figures(name):
    p = load(name)
    assert p.domain == 4
    assert typecheck(p) == []
    assert check_robustness_checked(p, PI).accepted


@pytest.mark.criterion(1, "corpus verdicts")
def test_c1_knowledge_sets():
    p = load("knowledge_growth")
    mp = {"l": 0}
    everything = {(("h", v), ("l", 0)) for v in range(8)}
    assert knowledge(p, mp, [("l", 0)]) == everything
    # observing that a further event follows (l, 0): h != 0
    assert progress_knowledge(p, mp, [("l", 0)]) == {(("h", v), ("l", 0)) for v in range(1, 8)}
    # after (l, 0)(l, 7): h = 7
    assert knowledge(p, mp, [("l", 0), ("l", 7)]) == {(("h", 7), ("l", 0))}


@pytest.mark.criterion(1, "corpus verdicts")
@pytest.mark.parametrize("path", FILES, ids=IDS)
def test_c1_corpus_expectations(path):
    rec = run_file(path)
    bad = [r for r in rec["results"] if not r["ok"]]
    assert not bad, bad


# ------------------------------------------------------- 2. knowledge chain

ENV2 = SecurityEnv((("h", ST), ("k", ST), ("l", PT), ("m", PT)))
VARS2 = ["h", "k", "l", "m"]
OPS = ["+", "-", "*", "==", "!=", "<", "<="]


def exprs(depth=2):
    leaf = st.one_of(st.sampled_from(VARS2).map(Var), st.integers(0, 3).map(Const))
    return st.recursive(leaf, lambda sub: st.builds(BinOp, st.sampled_from(OPS), sub, sub),
                        max_leaves=4)


assigns = st.builds(Assign, st.sampled_from(VARS2), exprs())


@st.composite
def programs(draw):
    pre = draw(st.lists(assigns, max_size=3))
    loop = []
    if draw(st.booleans()):
        loop = [While(draw(exprs()), seq(*draw(st.lists(assigns, min_size=1, max_size=2))))]
    post = draw(st.lists(assigns, max_size=3))
    n = draw(st.integers(2, 4))
    return Program(ENV2, seq(*(pre + loop + post)) if pre + loop + post else Skip(), n)


@pytest.mark.criterion(2, "knowledge monotonicity and sandwich chain")
@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs(), st.lists(st.integers(0, 3), min_size=4, max_size=4), st.sampled_from([PS, PI]))
def test_c2_knowledge_chain(p, values, mode):
    m = {x: v % p.domain for x, v in zip(VARS2, values)}
    mp = public_part(p, m)
    r = Machine(p.body, p.env.variables, p.domain).run(tuple(m[x] for x in p.env.variables))
    low = low_projection(r, p.env, mode)
    n = int(min(low.length, 6))
    me = tuple((x, m[x]) for x in p.env.variables)
    ks = [knowledge(p, mp, low.take(i), mode) for i in range(n + 1)]
    for i in range(n):
        kp = progress_knowledge(p, mp, low.take(i), mode)
        assert me in ks[i]
        assert ks[i] >= kp
        # silent divergence is not a further low event, so ⇑ escapes k→
        if low[i] != DIV:
            assert kp >= ks[i + 1]
        assert ks[i + 1] <= ks[i]
        if classify_release(p, m, low.take(i), low[i], PI):
            assert classify_release(p, m, low.take(i), low[i], PS)


# ------------------------------------------------------------ 3. control chain

@pytest.mark.criterion(3, "attacker control contains release control contains control after release")
@pytest.mark.parametrize("path", FILES, ids=IDS)
def test_c3_control_chain(path):
    p = parse_file(path)
    for mode in (PS, PI):
        universe = universe_for(p, mode)
        eng = engine_for(p, universe)
        for mi in range(len(eng.space.memories)):
            for ai in range(len(universe)):
                for pos in eng.info(ai, mode)[mi].releases:
                    r = eng.attacker_control(mi, mode, ai, pos)
                    rc = eng.release_control(mi, mode, ai, pos)
                    after = eng.attacker_control(mi, mode, ai, pos + 1)
                    assert rc & ~r == 0, (mode, mi, ai, pos)
                    assert after & ~rc == 0, (mode, mi, ai, pos)


# ------------------------------------------------------------- 4. reduction

ENDORSEMENT_FREE = [f for f in FILES
                    if not uses_endorse(parse_file(f).body) and not uses_checked(parse_file(f).body)]


@pytest.mark.criterion(4, "endorsement-free programs: endorse variant equals plain robustness")
@pytest.mark.parametrize("path", ENDORSEMENT_FREE, ids=[f.stem for f in ENDORSEMENT_FREE])
def test_c4_reduction(path):
    p = parse_file(path)
    for mode in (PS, PI):
        assert check_robustness(p, mode).status == check_robustness_endorse(p, mode).status
    universe = universe_for(p, PS)
    space = MemorySpace(p, reduce=True)
    for mem in space.memories:
        m = {x: 0 for x in p.env.variables} | space.as_dict(mem)
        for a in universe:
            r = Machine(substitute(p, a), p.env.variables, p.domain).run(tuple(m[x] for x in p.env.variables))
            assert irrelevant_attacks(p, m, r, universe) == frozenset()


# --------------------------------------------------------- 5. type soundness

def _semantic_program(p):
    return lower_checked(p) if uses_checked(p.body) else p


TYPED = [f for f in FILES if well_typed(parse_file(f))]


@pytest.mark.criterion(5, "type-accepted programs are robust")
@pytest.mark.parametrize("path", TYPED, ids=[f.stem for f in TYPED])
def test_c5_typed_programs_are_robust(path):
    q = _semantic_program(parse_file(path))
    v = check_robustness_endorse(q, PI)
    assert v.accepted, v.witness


@pytest.mark.criterion(5, "type-accepted programs are robust")
@pytest.mark.parametrize("path", FILES, ids=IDS)
def test_c5_semantic_rejects_are_untyped(path):
    # the type system is termination-insensitive: only PI (and integrity) rejects count
    text = path.read_text()
    rejects = [e for e in parse_expectations(text)
               if e.want == "reject" and (e.mode == PI or e.check == "integrity")]
    if rejects:
        assert not well_typed(parse_file(path))


@pytest.mark.criterion(5, "type-accepted programs are robust")
def test_c5_progress_leak_is_typable():
    # divergence leaks are outside what typing rules out
    p = load("progress_leak")
    assert well_typed(p)
    assert check_robustness(p, PS).status == "reject"
    assert check_robustness(p, PI).status == "accept"


# ---------------------------------------------------- 6. translation adequacy

TYPED_CHECKED = [f for f in TYPED if uses_checked(parse_file(f).body)]


def _sync_points(src_run, low_run):
    """Pairs (t, t̂) of event prefixes ending at corresponding endorsement points."""
    def events(r):
        return r.events.take(len(r.prefix) + 3 * len(r.lasso))
    s_ev, l_ev = events(src_run), events(low_run)
    s_idx = [i for i, e in enumerate(s_ev) if e.kind == "checked"]
    l_idx = [i for i, e in enumerate(l_ev) if e.kind == "endorse" and e.label.endswith("#0")]
    assert len(s_idx) == len(l_idx)
    out = []
    for i, j in zip(s_idx, l_idx):
        if l_ev[j].value:
            assert l_ev[j + 1].label.endswith("#1")
            j += 1
        out.append((s_ev[:i + 1], l_ev[:j + 1]))
    return out


@pytest.mark.criterion(6, "translation adequacy for checked endorsement")
def test_c6_typed_checked_corpus_nonempty():
    assert {f.stem for f in TYPED_CHECKED} >= {"password_update", "embargo"}


@pytest.mark.criterion(6, "translation adequacy for checked endorsement")
@pytest.mark.parametrize("path", TYPED_CHECKED, ids=[f.stem for f in TYPED_CHECKED])
def test_c6_lowering_types_and_verdicts_agree(path):
    p = parse_file(path)
    q = lower_checked(p)
    assert typecheck(q) == []
    assert check_robustness_checked(p, PI).status == check_robustness_endorse(q, PI).status


@pytest.mark.criterion(6, "translation adequacy for checked endorsement")
@pytest.mark.parametrize("path", TYPED_CHECKED, ids=[f.stem for f in TYPED_CHECKED])
def test_c6_synchronized_endorsements(path):
    p = parse_file(path, 2)
    q = lower_checked(p)
    points = 0
    for mode in (PS, PI):
        universe = universe_for(p, mode)
        for m in memories(p.env.variables, 2):
            mq = {x: m.get(x, 0) for x in q.env.variables}
            for a in universe:
                rs = Machine(substitute(p, a), p.env.variables, 2).run(tuple(m[x] for x in p.env.variables))
                rq = Machine(substitute(q, a), q.env.variables, 2).run(tuple(mq[x] for x in q.env.variables))
                for t, th in _sync_points(rs, rq):
                    points += 1
                    assert (attacker_control(p, m, a, t, mode, universe)
                            == attacker_control(q, mq, a, th, mode, universe))
                    assert (release_control(p, m, a, t, mode, universe)
                            == release_control(q, mq, a, th, mode, universe))
                    assert (irrelevant_attacks_checked(p, m, t, universe)
                            == irrelevant_attacks(q, mq, th, universe))
    assert points > 0


# ----------------------------------------------------------- 7. oracle

@pytest.mark.criterion(7, "similarity agrees with the segmentation oracle")
@pytest.mark.parametrize("path", FILES, ids=IDS)
def test_c7_similar_matches_oracle(path):
    p = parse_file(path, 2)
    compared = 0
    for mode in (PS, PI):
        universe = universe_for(p, mode)
        space = MemorySpace(p, reduce=True)
        for mem in space.memories:
            m = {x: 0 for x in p.env.variables} | space.as_dict(mem)
            for a in universe:
                for b in universe:
                    try:
                        want = similar_oracle(p, m, a, b, mode)
                    except ScaleError:
                        continue
                    assert similar(p, m, a, b, mode) == want, (mode, m, a, b)
                    compared += 1
    assert compared > 0


# ---------------------------------------------------------- 8. fairness

@pytest.mark.criterion(8, "fairness classification")
@pytest.mark.parametrize("attack,fair", [("low := 1", True), ("low := h > 0", True),
                                         ("low := h", False), ("skip", True)])
def test_c8_fairness(attack, fair):
    p = load("fair_attacks")
    a = (parse_command(attack, p.env),)
    assert is_fair(p, a) is fair


# ------------------------------------------------------- 9. determinism

@pytest.mark.criterion(9, "byte-identical corpus reports")
def test_c9_corpus_report_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        proc = subprocess.run([sys.executable, "-m", "robustcheck.cli", "corpus", "-q", "-o", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
