import math
import random

import pytest

from ctmcheck import (Bound, RefineParams, Verdict, approximate,
                      check_bounded_until, compare_bound, enumerate_full,
                      exact_until, finalize, parse_model, parse_property,
                      refine, resolve_nested)
from ctmcheck.checker import Comparison
from ctmcheck.csl import collect_prob_atoms, compile_state_formula

from conftest import (ERLANG2, TWO_COMMAND, TWO_STATE, corpus_model,
                      corpus_property_text, random_ctmc_source,
                      random_until_property)


def _checked(model, prop, kappa=1e-9):
    q = parse_property(prop, model)
    g = finalize(approximate(model, kappa), model)
    b = check_bounded_until(g, q.path.left, q.path.right, q.path.time_bound)
    return g, q, b


def test_trivial_initial_success():
    m = parse_model(TWO_STATE)
    _, _, b = _checked(m, "P=? [ true U<=1 true ]")
    assert (b.pmin, b.pmax) == (1.0, 1.0)


def test_unreachable_target_gives_absorbing_width():
    m = parse_model(TWO_COMMAND)
    q = parse_property("P=? [ true U<=1 x>=50 ]", m)
    g = finalize(approximate(m, 0.25), m)
    b = check_bounded_until(g, q.path.left, q.path.right, 1.0)
    assert b.pmin == 0.0
    assert b.pmax == pytest.approx(b.absorbing_mass)
    assert b.pmax > 0.0


def test_two_state_closed_form():
    m = parse_model(TWO_STATE)
    _, _, b = _checked(m, "P=? [ true U<=1 x=1 ]")
    expect = 1.0 - math.exp(-1.0)
    assert abs(b.pmin - expect) < 1e-8
    assert abs(b.pmax - expect) < 1e-8


def test_gap_identity():
    m = corpus_model("jackson")
    q = parse_property(corpus_property_text("jackson").strip(), m)
    for kappa in (1e-2, 1e-4, 1e-6):
        g = finalize(approximate(m, kappa), m)
        b = check_bounded_until(g, q.path.left, q.path.right,
                                q.path.time_bound)
        assert abs((b.pmax - b.pmin) - b.absorbing_mass) < 1e-12


def test_compare_bound():
    assert compare_bound(Bound(0.97, 0.99, 0.02, 0, 0), ">=", 0.5) \
        is Comparison.HOLDS
    assert compare_bound(Bound(0.0, 0.99, 0.99, 0, 0), ">=", 0.5) \
        is Comparison.UNKNOWN
    assert compare_bound(Bound(0.0, 0.3, 0.3, 0, 0), ">=", 0.5) \
        is Comparison.FAILS
    assert compare_bound(Bound(0.2, 0.4, 0.2, 0, 0), "<", 0.5) \
        is Comparison.HOLDS
    assert compare_bound(Bound(0.2, 0.4, 0.2, 0, 0), "<=", 0.1) \
        is Comparison.FAILS
    assert compare_bound(Bound(0.2, 0.4, 0.2, 0, 0), ">", 0.3) \
        is Comparison.UNKNOWN


def test_refine_single_iteration_exact():
    m = corpus_model("birth")
    q = parse_property("P=? [ true U<=1 x>=3 ]", m)
    rep = refine(m, q, RefineParams())
    assert rep.verdict is Verdict.EXACT_WITHIN_EPSILON
    assert len(rep.iterations) == 1
    expect = 1.0 - 2.5 * math.exp(-1.0)
    assert abs(rep.final_bound.pmin - expect) < 1e-9


def test_refine_threshold_holds_first_iteration():
    m = corpus_model("polling")
    q = parse_property("P>=0.5 [ true U<=10 station1_polled ]", m)
    rep = refine(m, q, RefineParams())
    assert rep.verdict is Verdict.HOLDS
    assert len(rep.iterations) == 1


def test_refine_threshold_fails():
    m = corpus_model("jackson")
    q = parse_property("P>=0.9 [ true U<=10 (jobs_1>=4 & jobs_2>=6) ]", m)
    rep = refine(m, q, RefineParams())
    assert rep.verdict is Verdict.FAILS


def test_refine_kappa_schedule():
    m = corpus_model("jackson")
    q = parse_property(corpus_property_text("jackson").strip(), m)
    rep = refine(m, q, RefineParams())
    kappas = [it.kappa for it in rep.iterations]
    assert kappas == pytest.approx([1e-3, 1e-6, 1e-9][:len(kappas)])
    assert rep.iterations[0].expansion_mode == "agnostic"
    assert all(it.expansion_mode == "guided" for it in rep.iterations[1:])


def test_refine_inconclusive_at_iteration_cap():
    m = corpus_model("jackson")
    q = parse_property(corpus_property_text("jackson").strip(), m)
    rep = refine(m, q, RefineParams(epsilon=1e-12, max_iterations=2))
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert len(rep.iterations) == 2


def test_zero_gap_on_fully_explored_model():
    m = parse_model(ERLANG2)
    _, _, b = _checked(m, "P=? [ true U<=1 x=2 ]")
    assert b.absorbing_mass == 0.0
    assert b.pmax - b.pmin <= 1e-10


def test_bound_soundness_small():
    rng = random.Random(31)
    for _ in range(8):
        n, src = random_ctmc_source(rng, min_states=5, max_states=40)
        m = parse_model(src)
        q = parse_property(random_until_property(rng, n), m)
        full = enumerate_full(m)
        phi_fn, _ = compile_state_formula(m, q.path.left)
        psi_fn, _ = compile_state_formula(m, q.path.right)
        exact = exact_until(full, lambda v: phi_fn(v, ()),
                            lambda v: psi_fn(v, ()), q.path.time_bound)
        for kappa in (1e-1, 1e-3, 1e-6):
            g = finalize(approximate(m, kappa), m)
            b = check_bounded_until(g, q.path.left, q.path.right,
                                    q.path.time_bound)
            assert b.pmin - 1e-9 <= exact <= b.pmax + 1e-9


def test_bound_soundness_on_guided_graphs():
    # the property-guided expansion chain must stay sound too, not just
    # property-agnostic exploration
    from ctmcheck import expand_property_guided

    rng = random.Random(777)
    for _ in range(10):
        n, src = random_ctmc_source(rng, min_states=5, max_states=60)
        m = parse_model(src)
        q = parse_property(random_until_property(rng, n), m)
        full = enumerate_full(m)
        phi_fn, _ = compile_state_formula(m, q.path.left)
        psi_fn, _ = compile_state_formula(m, q.path.right)
        exact = exact_until(full, lambda v: phi_fn(v, ()),
                            lambda v: psi_fn(v, ()), q.path.time_bound)
        g = approximate(m, 1e-1)
        for kappa in (1e-3, 1e-6):
            g = expand_property_guided(g, m, kappa, q.path.left,
                                       q.path.right)
            g = finalize(g, m)
            b = check_bounded_until(g, q.path.left, q.path.right,
                                    q.path.time_bound)
            assert b.pmin - 1e-9 <= exact <= b.pmax + 1e-9


NESTED_MODEL = """
ctmc
module walk
  x : [0..4] init 0;
  c : [0..1] init 0;
  [] x < 4 -> 1.0 : (x'=x+1);
  [] x > 0 -> 0.4 : (x'=x-1);
  [] c = 0 -> 0.8 : (c'=1);
  [] c = 1 -> 0.6 : (c'=0);
endmodule
label "beacon" = c = 1;
label "goal" = x = 4;
"""


def test_resolve_nested_against_per_state_oracle():
    m = parse_model(NESTED_MODEL)
    q = parse_property(
        'P=? [ (P>=0.5 [ true U<=2 "beacon" ]) U<=8 "goal" ]', m)
    g = finalize(approximate(m, 1e-12), m)
    atom, = collect_prob_atoms(q.path.left)
    tables = resolve_nested(g, q.path.left)
    table = tables[atom]
    # one full enumeration per initial state, through the oracle
    full = enumerate_full(m)
    for s in g.states:
        if s is None:
            continue
        full.initial_index = full.index[s]
        exact = exact_until(full, lambda v: True, lambda v: v[1] == 1, 2.0)
        assert table[s] == (exact >= 0.5), (s, exact)
    full.initial_index = 0


def test_resolve_nested_state_already_in_target():
    m = parse_model(NESTED_MODEL)
    q = parse_property(
        'P=? [ (P>=0.5 [ true U<=2 "beacon" ]) U<=8 "goal" ]', m)
    g = finalize(approximate(m, 1e-12), m)
    atom, = collect_prob_atoms(q.path.left)
    table = resolve_nested(g, q.path.left)[atom]
    for s in g.states:
        if s is not None and s[1] == 1:
            assert table[s] is True  # already satisfying: probability one


def test_nested_refine_uses_agnostic_mode():
    m = parse_model(NESTED_MODEL)
    q = parse_property(
        'P=? [ (P>=0.5 [ true U<=2 "beacon" ]) U<=8 "goal" ]', m)
    rep = refine(m, q, RefineParams())
    assert all(it.expansion_mode == "agnostic" for it in rep.iterations)
    assert rep.verdict is Verdict.EXACT_WITHIN_EPSILON
    # finite fully-explored model: the bound is a point value
    assert rep.final_bound.pmax - rep.final_bound.pmin < 1e-3


def test_nested_bound_sound_vs_flat_recomputation():
    # fully explored graph: nested verdicts reduce to exact satisfaction,
    # so checking with a precomputed flat success set must agree
    m = parse_model(NESTED_MODEL)
    q = parse_property(
        'P=? [ (P>=0.5 [ true U<=2 "beacon" ]) U<=8 "goal" ]', m)
    g = finalize(approximate(m, 1e-12), m)
    inner = resolve_nested(g, q.path.left)
    b = check_bounded_until(g, q.path.left, q.path.right, 8.0, inner)
    atom, = collect_prob_atoms(q.path.left)
    table = inner[atom]
    full = enumerate_full(m)
    exact = exact_until(full, lambda v: table[v], lambda v: v[0] == 4, 8.0)
    assert b.pmin - 1e-9 <= exact <= b.pmax + 1e-9
    assert b.pmax - b.pmin < 1e-9


GRID_ROBOT = """
ctmc
const double move = 1.0;
const double ping = 0.8;
const double drop = 0.6;
module robot
  x : [0..3] init 0;
  y : [0..3] init 0;
  c : [0..1] init 0;
  [] x < 3 -> move : (x'=x+1);
  [] y < 3 -> move : (y'=y+1);
  [] c = 0 -> ping : (c'=1);
  [] c = 1 -> drop : (c'=0);
endmodule
label "communicate" = c = 1;
label "goal" = x = 3 & y = 3;
"""


def test_grid_robot_nested_end_to_end():
    # corner-to-corner walk that must keep a communication flag likely on:
    # the outer until runs over states classified by an inner window query
    m = parse_model(GRID_ROBOT)
    q = parse_property(
        'P=? [ (P>=0.4 [ true U<=2 "communicate" ]) U<=20 "goal" ]', m)
    rep = refine(m, q, RefineParams())
    assert rep.verdict is Verdict.EXACT_WITHIN_EPSILON
    assert all(it.expansion_mode == "agnostic" for it in rep.iterations)
    b = rep.final_bound

    # independent route: rebuild the inner table on the final graph, then
    # let the oracle run the outer until with that table as the left side
    g = rep.graph
    atom, = collect_prob_atoms(q.path.left)
    table = resolve_nested(g, q.path.left)[atom]
    full = enumerate_full(m)
    assert g.size - 1 == full.size  # 32 states, fully explored
    exact = exact_until(full, lambda v: table[v],
                        lambda v: v[0] == 3 and v[1] == 3, 20.0)
    assert b.pmin - 1e-9 <= exact <= b.pmax + 1e-9
    assert b.pmax - b.pmin < 1e-9
    assert 0.0 < exact < 1.0

    # the inner classification itself must match per-state exact values
    for s in full.states:
        full.initial_index = full.index[s]
        inner_exact = exact_until(full, lambda v: True,
                                  lambda v: v[2] == 1, 2.0)
        assert table[s] == (inner_exact >= 0.4), (s, inner_exact)
    full.initial_index = 0


def test_refine_deterministic():
    m = corpus_model("jackson")
    q = parse_property(corpus_property_text("jackson").strip(), m)
    a = refine(m, q, RefineParams())
    b = refine(m, q, RefineParams())
    assert [(it.r, it.kappa, it.bound.pmin, it.bound.pmax, it.bound.states)
            for it in a.iterations] == \
           [(it.r, it.kappa, it.bound.pmin, it.bound.pmax, it.bound.states)
            for it in b.iterations]
    assert a.verdict is b.verdict


def test_refine_params_validation():
    m = corpus_model("birth")
    q = parse_property("P=? [ true U<=1 x>=3 ]", m)
    with pytest.raises(ValueError, match="kappa"):
        refine(m, q, RefineParams(kappa0=0.0))
    with pytest.raises(ValueError, match="reduction"):
        refine(m, q, RefineParams(reduction_factor=1.0))
    with pytest.raises(ValueError, match="epsilon"):
        refine(m, q, RefineParams(epsilon=0.0))
