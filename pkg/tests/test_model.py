import random
from fractions import Fraction
from math import fsum

import pytest

from ctmcheck import (ModelRuntimeError, ParseError, eval_predicate, exit_rate,
                      format_model, initial_state, parse_model, successors)
from ctmcheck.model import parse_predicate

from conftest import PURE_BIRTH, TWO_COMMAND, corpus_model, random_ctmc_source


def test_parse_minimal_pure_birth():
    m = parse_model(PURE_BIRTH)
    assert len(m.variables) == 1
    assert len(m.commands) == 1
    assert m.variables[0].upper is None


def test_init_below_lower_bound_rejected():
    src = PURE_BIRTH.replace("init 0", "init -1")
    with pytest.raises(ParseError, match="init below lower bound"):
        parse_model(src)


def test_tandem_corpus_shape():
    m = corpus_model("tandem")
    assert len(m.variables) == 3
    assert len(m.commands) == 5


def test_initial_state_examples():
    assert initial_state(parse_model(PURE_BIRTH)) == (0,)
    m = parse_model("""
        ctmc module t
          lacI : [0..] init 60;
          tetR : [0..] init 0;
          [] lacI > 0 -> 0.1 : (lacI'=lacI-1);
        endmodule
    """)
    assert initial_state(m) == (60, 0)
    m2 = parse_model("""
        ctmc module t2
          a : [0..9] init 3;
          b : [0..9] init 7;
          [] a < 9 -> 1 : (a'=a+1);
        endmodule
    """)
    assert initial_state(m2) == (3, 7)


def test_successors_pure_birth():
    m = parse_model(PURE_BIRTH)
    ts = successors(m, (5,))
    assert len(ts) == 1
    assert ts[0].target == (6,)
    assert ts[0].rate == 1.0


def test_successors_two_commands():
    m = parse_model(TWO_COMMAND)
    ts = successors(m, (0, 0))
    assert [(t.target, t.rate) for t in ts] == [((1, 0), 4.0), ((0, 1), 1.0)]


def test_successors_merge_duplicate_targets():
    m = parse_model("""
        ctmc module m
          x : [0..1] init 0;
          [] x = 0 -> 2.0 : (x'=1);
          [] x = 0 -> 3.0 : (x'=1);
        endmodule
    """)
    ts = successors(m, (0,))
    assert len(ts) == 1
    assert ts[0].rate == pytest.approx(5.0, abs=0)
    # per-command enumeration gives the same total
    per_command = [2.0, 3.0]
    assert ts[0].rate == sum(per_command)


def test_merge_soundness_random_models():
    # sum of merged rates equals the brute-force sum over enabled commands
    # (the generator writes no self-loops, so nothing is dropped)
    from ctmcheck.expressions import compile_expression

    rng = random.Random(99)
    for _ in range(20):
        n, src = random_ctmc_source(rng, min_states=4, max_states=25)
        m = parse_model(src)
        for i in range(min(n, 6)):
            s = (i,)
            merged = fsum(t.rate for t in successors(m, s))
            brute = []
            for cmd in m.commands:
                if eval_predicate(m, s, cmd.guard):
                    rate_fn = compile_expression(cmd.rate, m.var_index,
                                                 m.constants)
                    brute.append(float(rate_fn(s)))
            assert merged == pytest.approx(fsum(brute), abs=1e-12)


def test_exit_rate():
    m = parse_model(TWO_COMMAND)
    assert exit_rate([]) == 0.0
    assert exit_rate(successors(m, (0, 0))) == 5.0
    m2 = parse_model("""
        ctmc module m
          x : [0..3] init 0;
          [] x = 0 -> 0.5 : (x'=1);
          [] x = 0 -> 0.25 : (x'=2);
          [] x = 0 -> 0.25 : (x'=3);
        endmodule
    """)
    assert exit_rate(successors(m2, (0, ))) == 1.0


def test_eval_predicate_examples():
    m = parse_model("""
        ctmc module t
          lacI : [0..] init 60;
          tetR : [0..] init 0;
          [] lacI > 0 -> 0.1 : (lacI'=lacI-1);
        endmodule
    """)
    assert eval_predicate(m, (60, 0), "lacI<20") is False
    assert eval_predicate(m, (60, 0), "true") is True
    m2 = parse_model("""
        ctmc module q
          jobs_1 : [0..] init 0;
          jobs_2 : [0..] init 0;
          [] true -> 1 : (jobs_1'=jobs_1+1);
        endmodule
    """)
    assert eval_predicate(m2, (4, 6), "jobs_1>=4 & jobs_2>=6") is True


def test_eval_predicate_unknown_identifier():
    m = parse_model(PURE_BIRTH)
    with pytest.raises(ParseError, match="unknown identifier"):
        eval_predicate(m, (0,), "y > 1")


def test_self_loops_dropped():
    m = parse_model("""
        ctmc module m
          x : [0..2] init 0;
          [] true -> 5.0 : (x'=x);
          [] x < 2 -> 1.0 : (x'=x+1);
        endmodule
    """)
    ts = successors(m, (0,))
    assert [(t.target, t.rate) for t in ts] == [((1,), 1.0)]
    assert successors(m, (2,)) == []  # deadlock once the loop is dropped


def test_runtime_errors():
    m = parse_model("""
        ctmc module m
          x : [0..3] init 3;
          [] true -> 1.0 : (x'=x+1);
        endmodule
    """)
    with pytest.raises(ModelRuntimeError, match="outside its declared range"):
        successors(m, (3,))
    m2 = parse_model("""
        ctmc module m
          x : [0..] init 0;
          [] true -> x : (x'=x+1);
        endmodule
    """)
    with pytest.raises(ModelRuntimeError, match="rate"):
        successors(m2, (0,))
    m3 = parse_model("""
        ctmc module m
          x : [0..] init 0;
          [] true -> 1.0/x : (x'=x+1);
        endmodule
    """)
    with pytest.raises(ModelRuntimeError, match="division by zero"):
        successors(m3, (0,))


def test_integer_overflow_detected():
    m = parse_model("""
        ctmc module m
          x : [1..] init 1;
          [] true -> 1.0 : (x'=x*x);
        endmodule
    """)
    s = (2,)
    for _ in range(5):
        s = successors(m, s)[0].target
    with pytest.raises(ModelRuntimeError, match="outside its declared range"):
        while True:
            s = successors(m, s)[0].target


def test_static_errors():
    with pytest.raises(ParseError, match="only ctmc"):
        parse_model("dtmc module m x:[0..1] init 0; endmodule")
    with pytest.raises(ParseError, match="duplicate variable"):
        parse_model("ctmc module m x:[0..1] init 0; x:[0..1] init 0; "
                    "endmodule")
    with pytest.raises(ParseError, match="unknown identifier"):
        parse_model("ctmc module m x:[0..1] init 0; "
                    "[] y > 0 -> 1:(x'=1); endmodule")
    with pytest.raises(ParseError, match="not boolean"):
        parse_model("ctmc module m x:[0..1] init 0; "
                    "[] x + 1 -> 1:(x'=1); endmodule")
    with pytest.raises(ParseError, match="not integer-valued"):
        parse_model("ctmc module m x:[0..4] init 0; "
                    "[] x < 4 -> 1:(x'=x/2); endmodule")
    with pytest.raises(ParseError, match="int but its value"):
        parse_model("ctmc const int c = 1/2; module m x:[0..1] init 0; "
                    "[] x=0 -> 1:(x'=1); endmodule")


def test_constant_expressions_fold_exactly():
    m = parse_model("""
        ctmc
        const int c = 7;
        const double lambda = 4*c;
        const double phase = 0.1*2;
        module m
          x : [0..c] init 0;
          [] x < c -> lambda + phase : (x'=x+1);
        endmodule
    """)
    assert m.constants["lambda"] == Fraction(28)
    assert m.constants["phase"] == Fraction(1, 5)
    ts = successors(m, (0,))
    assert ts[0].rate == 28.2


def test_labels_resolve_in_predicates_not_guards():
    m = corpus_model("tandem")
    full = (7, 1, 0)
    assert eval_predicate(m, full, parse_predicate(m, "queue1_full"))
    assert eval_predicate(m, full, parse_predicate(m, '"queue1_full"'))
    assert not eval_predicate(m, (0, 1, 0), parse_predicate(m, "queue1_full"))
    with pytest.raises(ParseError, match="unknown identifier"):
        parse_model("""
            ctmc module m
              x : [0..1] init 0;
              [] full -> 1 : (x'=1);
            endmodule
            label "full" = x = 1;
        """)


def test_round_trip_corpus_models():
    for name in ("birth", "toggle", "tandem", "polling", "jackson"):
        m = corpus_model(name)
        printed = format_model(m)
        again = parse_model(printed)
        assert again == m
        assert format_model(again) == printed


def test_parse_is_deterministic():
    src = TWO_COMMAND
    assert parse_model(src) == parse_model(src)
    m = parse_model(src)
    assert successors(m, (3, 4)) == successors(m, (3, 4))
