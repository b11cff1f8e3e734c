import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvewalk.boundary import Constant, Kind, Tabulated
from curvewalk.increments import Lattice, StableExact
from curvewalk.oracle import dp_survival
from curvewalk.rng import RngStream
from curvewalk.whbound import (PositivitySequence, bound_check, positivity_probs, qn_sequence, r1_estimate)

F = Fraction
RADEMACHER = Lattice.rademacher()
DRIFT = Lattice([-2, 1], [F(1, 4), F(3, 4)], require_centered=False)
THREE = Lattice([-3, -1, 2], [F(1, 4), F(1, 4), F(1, 2)])


def shifted_linear(top=600):
    return Tabulated.from_function(lambda t: np.maximum(0, t - 10), top, index=1.0)


def test_positivity_examples():
    s = positivity_probs(RADEMACHER, None, 6)
    assert s.b[:3] == [F(1, 2), F(3, 4), F(1, 2)]
    assert s.r == [F(0), F(1, 2), F(0), F(3, 8), F(0), F(5, 16)]
    assert all(r <= b for r, b in zip(s.r, s.b))
    assert s.is_exact and s.provenance == "dp-exact"


def test_positivity_needs_lattice_for_dp_and_rng_for_mc():
    with pytest.raises(TypeError):
        positivity_probs(StableExact(1.5, 1.0), None, 4)
    with pytest.raises(ValueError):
        positivity_probs(StableExact(1.5, 1.0), None, 4, mode="mc")


def test_monte_carlo_positivity_matches_exact():
    ex = positivity_probs(THREE, Constant(1), 20)
    mc = positivity_probs(THREE, Constant(1), 20, mode="mc", n_paths=50000, rng=RngStream(90))
    assert mc.provenance == "mc"
    b = np.array([float(v) for v in ex.b])
    assert np.all(np.abs(np.array(mc.b) - b) <= 3 * mc.b_stderr + 1e-12)
    assert np.all(np.array(mc.r) <= np.array(mc.b))


def test_qn_hand_recursion():
    q = qn_sequence(positivity_probs(RADEMACHER, None, 3))
    assert q == [1, F(1, 2), F(1, 2), F(3, 8)]


def test_qn_trivial_series():
    assert qn_sequence([F(0)] * 5) == [1, 0, 0, 0, 0, 0]
    assert qn_sequence([F(1)] * 5) == [1] * 6
    assert qn_sequence([1.0] * 5) == pytest.approx([1.0] * 6)


def test_qn_rejects_short_input():
    with pytest.raises(ValueError):
        qn_sequence([F(1, 2)], 3)


def test_integer_and_fraction_recursions_agree():
    s = positivity_probs(THREE, Constant(2), 60)
    fast = qn_sequence(s)
    slow = qn_sequence(list(s.b))
    assert fast == slow


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(0, 1, max_denominator=64), min_size=1, max_size=25))
def test_qn_is_a_probability_sequence_when_b_is(b):
    q = qn_sequence(b)
    assert all(0 <= x <= 1 for x in q)
    # the float path agrees with the exact path
    qf = qn_sequence([float(x) for x in b])
    assert np.allclose([float(x) for x in q], qf, atol=1e-12)


@pytest.mark.parametrize("model", [RADEMACHER, DRIFT, THREE])
def test_sparre_andersen_identity(model):
    q = qn_sequence(positivity_probs(model, None, 120))
    p = dp_survival(model, None, Kind.ZERO, 120, exact=True).exact
    assert list(q) == list(p)


def test_r1_of_zero_sequence_is_one():
    est = r1_estimate([0.0] * 64)
    assert est.partial_sum_exp == 1.0 and est.tail_bound == 0.0 and not est.divergent


def test_r1_for_simple_walk_converges():
    s = positivity_probs(RADEMACHER, None, 2**12 - 1, mode="float")
    est = r1_estimate(s)
    assert not est.divergent
    # dyadic blocks of P(S_n = 0)/n shrink by about sqrt(2)
    assert est.block_ratio == pytest.approx(1 / math.sqrt(2), rel=0.02)
    assert 1.9 < est.partial_sum_exp < est.upper < 2.05


def test_r1_for_linear_boundary_diverges():
    g = shifted_linear(2**10)
    est = r1_estimate(positivity_probs(RADEMACHER, g, 2**10 - 1, mode="float"))
    assert est.divergent and math.isinf(est.upper)


def test_bound_holds_for_shifted_linear_boundary():
    rep = bound_check(RADEMACHER, shifted_linear(), 128)
    assert rep.precondition_ok and rep.holds
    assert rep.worst_slack >= 0


def test_bound_is_tight_at_zero_boundary():
    rep = bound_check(RADEMACHER, None, 200)
    assert rep.holds
    assert max(abs(float(q - p)) for q, p in zip(rep.q, rep.p_Tg)) <= 1e-10
    assert np.allclose(rep.ratio_T0, 1.0)
    # sandwich: the exact ratio is 1 and lies below the R(1) bound
    assert rep.r1 is not None and rep.r1.upper >= 1


def test_bound_reports_failed_precondition():
    g = Tabulated.from_function(np.sqrt, 100, index=0.5)
    rep = bound_check(RADEMACHER, g, 50)
    assert not rep.precondition_ok and not rep.holds
    assert rep.additivity_worst < 0


def test_bound_csv():
    rep = bound_check(RADEMACHER, None, 4)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,b,r,q,p_Tg,p_T0"
    assert lines[4] == "3,0.5,0.0,0.375,0.375,0.375"


def test_sequence_validation():
    with pytest.raises(ValueError):
        PositivitySequence([F(1, 2)], [], "dp-exact")
    with pytest.raises(ValueError):
        PositivitySequence([F(1, 2)], [F(0)], "guess")
