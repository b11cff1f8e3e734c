import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvewalk.boundary import Kind
from curvewalk.curves import SurvivalCurve, ratio_curve
from curvewalk.increments import Lattice, StableExact
from curvewalk.ladder import (CensoringError, FitError, LadderRecord, estimate_renewal_h, fit_tail,
                              harmonicity_residual, simulate_ladder, simulate_ladders, spitzer_positivity,
                              survival_T0, tail_consistency)
from curvewalk.oracle import dp_survival, lattice_renewal
from curvewalk.renewal import ExtrapolationError, RenewalFunction, RenewalTable
from curvewalk.rng import RngStream

F = Fraction
RADEMACHER = Lattice.rademacher()
SKEW = Lattice([-2, 1], [F(1, 3), F(2, 3)])


def within(est, target, k=3.0):
    return abs(est - target) <= k * est_se(est, target)


def est_se(p, n):
    return math.sqrt(p * (1 - p) / n)


# -- ladder records ----------------------------------------------------------------

def test_record_validation():
    assert LadderRecord(3, 1.0).tau == 3
    with pytest.raises(ValueError):
        LadderRecord(0, 1.0)
    with pytest.raises(ValueError):
        LadderRecord(2, 0.0)
    with pytest.raises(ValueError):
        LadderRecord(10, 1.0, censored=True)
    assert LadderRecord(10, None, censored=True).chi is None


def test_rademacher_epoch_law_and_unit_heights():
    n = 10**6
    s = simulate_ladders(RADEMACHER, n, 16, RngStream(31))
    for tau, p in [(1, 1 / 2), (3, 1 / 8), (5, 1 / 16)]:
        assert abs(np.mean(s.tau == tau) - p) <= 3 * est_se(p, n)
    assert np.all(s.tau[~s.censored] % 2 == 1)
    assert np.all(s.chi[~s.censored] == 1)
    assert np.all(s.tau >= 1)


def test_censored_records_carry_the_horizon():
    s = simulate_ladders(RADEMACHER, 2000, 4, RngStream(32))
    recs = s.records()
    cens = [r for r in recs if r.censored]
    assert cens and all(r.tau == 4 and r.chi is None for r in cens)
    # P(T_0 > 4) = C(4, 2) / 16
    assert s.censored_fraction == pytest.approx(6 / 16, abs=4 * est_se(6 / 16, 2000))


def test_single_ladder_is_reproducible():
    assert simulate_ladder(SKEW, 1000, RngStream(5)) == simulate_ladder(SKEW, 1000, RngStream(5))


# -- renewal function -------------------------------------------------------------------

def test_rademacher_renewal_estimate_is_deterministic():
    t = estimate_renewal_h(RADEMACHER, [0, 1, 2.7, 5], 500, RngStream(33), horizon=10**7)
    assert t.values.tolist() == [1.0, 2.0, 3.0, 6.0]
    assert np.all(t.stderr == 0)


def test_renewal_estimate_refuses_heavy_censoring():
    with pytest.raises(CensoringError):
        estimate_renewal_h(RADEMACHER, [0, 10], 2000, RngStream(34), horizon=100)


def test_renewal_grid_must_start_at_zero():
    with pytest.raises(ValueError):
        estimate_renewal_h(RADEMACHER, [1, 2], 10, RngStream(1))


@pytest.mark.parametrize("model", [SKEW, StableExact(1.5, 1.0)])
def test_renewal_table_is_monotone_and_subadditive(model):
    grid = [0, 1, 2, 3, 4, 5, 6, 8, 10]
    t = estimate_renewal_h(model, grid, 4000, RngStream(35), horizon=10**6, max_censored=0.01)
    assert t.values[0] == 1.0
    assert t.is_monotone
    assert t.subadditivity_violation(3.0) <= 0
    h = dict(zip(t.grid, t.values))
    se = dict(zip(t.grid, t.stderr))
    assert h[5] <= h[2] + h[3] + 3 * math.sqrt(se[5] ** 2 + se[2] ** 2 + se[3] ** 2)


def test_skew_renewal_estimate_matches_oracle():
    exact = lattice_renewal(SKEW, 10)
    t = estimate_renewal_h(SKEW, np.arange(11), 20000, RngStream(36), horizon=10**6, max_censored=0.01)
    assert np.all(np.abs(t.values - exact.values) <= 3 * t.stderr + 1e-12)


def test_renewal_table_csv_round_trip(tmp_path):
    t = RenewalTable([0, 1, 2], [1.0, 1.5, 2.25], [0.0, 0.01, 0.02], 100)
    t.to_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "x,value,stderr,n_paths"
    back = RenewalTable.from_csv(tmp_path / "h.csv")
    assert np.array_equal(back.values, t.values) and back.n_paths == 100


def test_renewal_function_extension_is_limited():
    h = RenewalFunction.from_integers(np.arange(11) + 1.0, index=1.0)
    assert h(5.5) == 6.0
    assert h(-0.5) == 0.0
    assert h(20) == pytest.approx(11 * 2)
    assert h.extended_evaluations == 1
    with pytest.raises(ExtrapolationError):
        h(101)
    with pytest.raises(ValueError):
        RenewalFunction([0, 1], [2.0, 3.0])


# -- harmonicity ------------------------------------------------------------------------

def test_harmonicity_hand_values():
    h = lambda x: math.floor(x) + 1
    assert harmonicity_residual(RADEMACHER, h, 1) == 0.0
    assert harmonicity_residual(RADEMACHER, h, 0) == 0.0
    assert harmonicity_residual(RADEMACHER, np.arange(10) + 1.0, 4) == 0.0


def test_wrong_h_is_not_harmonic():
    assert abs(harmonicity_residual(RADEMACHER, lambda x: (x + 1) ** 2, 3)) > 0.5


# -- tail of T_0 ------------------------------------------------------------------------

def test_survival_T0_examples():
    n = 200_000
    c = survival_T0(RADEMACHER, [1, 3, 10], n, RngStream(37))
    for m, p in [(1, 0.5), (3, 3 / 8), (10, 0.24609375)]:
        assert abs(c.at(m) - p) <= 3 * est_se(p, n)
    assert c.is_nonincreasing
    assert c.provenance == "mc"


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_survival_T0_is_always_nonincreasing(seed):
    c = survival_T0(StableExact(1.5, 1.0), [1, 2, 4, 8, 16, 32, 64], 500, RngStream(seed))
    assert c.is_nonincreasing


def test_fit_tail_on_exact_curve():
    grid = [2**k for k in range(8, 15)]
    c = dp_survival(RADEMACHER, None, Kind.ZERO, n_grid=grid)
    fit = fit_tail(c, (2**8, 2**14))
    assert fit.exponent == pytest.approx(-0.5, abs=0.02)
    assert fit.residual < 0.01


def test_fit_tail_on_stable_monte_carlo():
    grid = [2**k for k in range(4, 11)]
    c = survival_T0(StableExact(1.5, 1.0), grid, 100_000, RngStream(38))
    assert fit_tail(c, (2**4, 2**10)).exponent == pytest.approx(-2 / 3, abs=0.05)


def test_fit_tail_rejects_degenerate_input():
    n = [2**k for k in range(6)]
    with pytest.raises(FitError):
        fit_tail(SurvivalCurve(n, np.full(6, 0.3), np.zeros(6), "mc"), (1, 32))
    with pytest.raises(FitError):
        fit_tail(SurvivalCurve(n, np.linspace(0.1, 0.5, 6), np.zeros(6), "mc"), (1, 32))
    with pytest.raises(FitError):
        fit_tail(SurvivalCurve(n[:3], [0.5, 0.4, 0.3], np.zeros(3), "mc"), (1, 32))


def test_spitzer_examples():
    e = spitzer_positivity(RADEMACHER, 2, 200_000, RngStream(39))
    assert abs(e.mean - 0.75) <= 3 * e.stderr
    e = spitzer_positivity(RADEMACHER, 10**4, 100_000, RngStream(40))
    # P(S_n >= 0) = 1/2 + P(S_n = 0)/2 for the simple walk
    atom = math.comb(10**4, 5000) / 2**10000
    assert abs(e.mean - 0.5) <= 3 * e.stderr + atom / 2 + 1e-12
    assert atom / 2 < 0.005
    with pytest.raises(ValueError):
        spitzer_positivity(RADEMACHER, 0, 10, RngStream(1))


def test_tail_consistency_for_simple_walk():
    h = lattice_renewal(RADEMACHER, 200)
    tc = tail_consistency(RADEMACHER, [100, 1000, 10000], 100_000, RngStream(41), h)
    assert tc.variation < 2
    assert tc.last == pytest.approx(math.sqrt(2 / math.pi), rel=0.1)


# -- curves and ratios -------------------------------------------------------------------

def test_identical_coupled_curves_have_unit_ratio():
    c = survival_T0(RADEMACHER, [1, 4, 16], 5000, RngStream(42))
    r = ratio_curve(c, c)
    assert r.method == "coupled-nested"
    assert np.all(r.ratio == 1)
    assert np.allclose(r.stderr, 0, atol=1e-12)


def test_ratio_rejects_mismatched_grids():
    a = SurvivalCurve([1, 2], [0.5, 0.4], [0, 0], "dp-exact")
    b = SurvivalCurve([1, 3], [0.5, 0.4], [0, 0], "dp-exact")
    with pytest.raises(ValueError):
        ratio_curve(a, b)


def test_exact_ratio_for_unit_boundary_tends_to_two():
    grid = [2**k for k in range(6, 13)]
    from curvewalk.boundary import Constant

    num = dp_survival(RADEMACHER, Constant(1), Kind.LOWER, n_grid=grid)
    den = dp_survival(RADEMACHER, None, Kind.ZERO, n_grid=grid)
    r = ratio_curve(num, den)
    assert r.method == "exact"
    assert r.ratio[-1] == pytest.approx(2.0, rel=0.05)


def test_survival_curve_csv_round_trip(tmp_path):
    c = dp_survival(SKEW, None, Kind.ZERO, 20)
    c.to_csv(tmp_path / "c.csv")
    back = SurvivalCurve.from_csv(tmp_path / "c.csv")
    assert np.array_equal(back.prob, c.prob) and back.provenance == "dp-exact"
