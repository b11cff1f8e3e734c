import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from curvewalk.increments import (DomainError, Lattice, ParetoTails, StableExact, model_from_dict,
                                  norming_c, positivity_index, sample_increment, truncated_second_moment)
from curvewalk.rng import RngStream

RADEMACHER = Lattice.rademacher()


# -- positivity index ---------------------------------------------------------

@pytest.mark.parametrize("alpha,beta,rho", [(1, 0, 0.5), (2, 0, 0.5), (1.5, 1, 1 / 3)])
def test_positivity_index_examples(alpha, beta, rho):
    assert positivity_index(alpha, beta) == pytest.approx(rho, abs=1e-15)


@pytest.mark.parametrize("alpha,beta", [(1.5, 1), (0.8, 0.5)])
def test_positivity_index_reflection_is_exact(alpha, beta):
    assert positivity_index(alpha, -beta) == 1 - positivity_index(alpha, beta)


@pytest.mark.parametrize("alpha,beta", [(1, 0.5), (2, 0.1), (0.5, 1), (2.5, 0), (0, 0), (1.5, 1.2)])
def test_positivity_index_rejects_inadmissible(alpha, beta):
    with pytest.raises(DomainError):
        positivity_index(alpha, beta)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.95).filter(lambda a: abs(a - 1) > 1e-6), st.floats(-0.99, 0.99))
def test_positivity_index_lies_in_unit_interval_and_reflects(alpha, beta):
    rho = positivity_index(alpha, beta)
    assert 0 < rho < 1
    assert positivity_index(alpha, -beta) == pytest.approx(1 - rho, abs=1e-14)


# -- truncated second moment and norming ----------------------------------------

def test_truncated_second_moment_rademacher():
    assert truncated_second_moment(RADEMACHER, 2.0) == pytest.approx(0.25)
    assert truncated_second_moment(RADEMACHER, 0.5) == 0.0
    # strict inequality |X| < u
    assert truncated_second_moment(RADEMACHER, 1.0) == 0.0


def test_truncated_second_moment_rejects_nonpositive_u():
    with pytest.raises(ValueError):
        truncated_second_moment(RADEMACHER, 0.0)


def test_pareto_closed_form_matches_quadrature():
    m = ParetoTails(1.5, 0.7)
    a, s, w = m.alpha, m.shift, m.weight_right
    from scipy import integrate

    def branch(c, u):
        f = lambda y: (y - c) ** 2 * a * y ** (-a - 1)
        lo, hi = max(1.0, c - u), c + u
        return integrate.quad(f, lo, hi, limit=200)[0] if hi > lo else 0.0

    for u in (0.5, 2.0, 7.3, 150.0):
        direct = (w * branch(s, u) + (1 - w) * branch(-s, u)) / u**2
        assert truncated_second_moment(m, u) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("model", [ParetoTails(1.5, 0.5), ParetoTails(1.2, 0.9), ParetoTails(0.7, 0.3),
                                   StableExact(1.5, 1.0), StableExact(0.8, 0.2)])
def test_mu_is_regularly_varying_with_index_minus_alpha(model):
    u = np.logspace(2, 4, 21)
    slope = np.polyfit(np.log(u), np.log(truncated_second_moment(model, u)), 1)[0]
    assert slope == pytest.approx(-model.alpha, abs=0.1)


def test_symmetric_pareto_slope_is_tight():
    u = np.logspace(2, 4, 21)
    slope = np.polyfit(np.log(u), np.log(truncated_second_moment(ParetoTails(1.5), u)), 1)[0]
    assert slope == pytest.approx(-1.5, abs=0.05)


def test_norming_rademacher():
    assert norming_c(RADEMACHER, 4) == pytest.approx(2.0, rel=1e-9)
    assert norming_c(RADEMACHER, 1) == pytest.approx(1.0, rel=1e-9)
    assert norming_c(RADEMACHER, 1e4) == pytest.approx(100.0, rel=1e-9)


def test_norming_rejects_small_x():
    with pytest.raises(DomainError):
        norming_c(RADEMACHER, 0.5)


def test_norming_gaussian_stable_is_sqrt_of_twice_x():
    # mu(u) ~ 2/u**2 for N(0, 2), so c(x) ~ sqrt(2x)
    assert norming_c(StableExact(2.0), 100.0) == pytest.approx(math.sqrt(200), rel=1e-3)


MODELS = [RADEMACHER, Lattice([-2, 1], [Fraction(1, 3), Fraction(2, 3)]), StableExact(1.5, 1.0),
          StableExact(0.8, 0.0), ParetoTails(1.5, 0.8), ParetoTails(1.8, 0.5)]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(MODELS), st.floats(1, 1e8), st.floats(1, 1e3))
def test_norming_is_nondecreasing(model, x, factor):
    assert norming_c(model, x * factor) >= norming_c(model, x) * (1 - 1e-9)


@pytest.mark.parametrize("model", [StableExact(1.5, 1.0), StableExact(0.8, 0.5), ParetoTails(1.5, 0.5),
                                   ParetoTails(1.2, 0.8), RADEMACHER])
def test_norming_divided_by_power_is_slowly_varying(model):
    x = 2.0**20
    r1 = norming_c(model, x) / x ** (1 / model.alpha)
    r2 = norming_c(model, 2 * x) / (2 * x) ** (1 / model.alpha)
    assert abs(r2 / r1 - 1) < 0.05


# -- models and sampling ------------------------------------------------------------

def test_lattice_validation():
    with pytest.raises(ValueError):
        Lattice([-1, 1], [0.5, 0.6])
    with pytest.raises(ValueError):
        Lattice([1, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        Lattice([-1, 2], [0.5, 0.5])
    drift = Lattice([-2, 1], [Fraction(1, 4), Fraction(3, 4)], require_centered=False)
    assert drift.mean == pytest.approx(0.25)
    with pytest.raises(DomainError):
        drift.rho


def test_stable_admissibility():
    with pytest.raises(DomainError):
        StableExact(1.0, 0.5)
    with pytest.raises(DomainError):
        StableExact(2.0, 0.3)
    assert StableExact(1.5, 1.0).rho == pytest.approx(1 / 3)


def test_pareto_is_mean_centred_and_tail_balanced():
    m = ParetoTails(1.5, 0.8)
    assert m.beta == pytest.approx(0.6)
    assert m.shift == pytest.approx(0.6 * 1.5 / 0.5)
    x = m.sample(RngStream(3).generator, 2_000_000)
    # heavy tails: compare the median of batch means instead of the raw mean
    assert abs(np.median(x.reshape(200, -1).mean(axis=1))) < 0.1
    with pytest.raises(ValueError):
        ParetoTails(1.5, 0.8, shift=0.0)


def test_stable_gaussian_matches_normal_cdf():
    x = StableExact(2.0, 0.0, 1.0).sample(RngStream(11).generator, 100_000)
    d = stats.kstest(x, stats.norm(scale=math.sqrt(2)).cdf).statistic
    assert d < 0.01


def test_rademacher_mean_is_zero():
    x = RADEMACHER.sample(RngStream(12).generator, 1_000_000)
    assert abs(x.mean()) < 3e-3
    assert set(np.unique(x)) == {-1.0, 1.0}


def test_cauchy_median_is_zero():
    x = StableExact(1.0, 0.0, 1.0).sample(RngStream(13).generator, 100_000)
    assert abs(np.median(x)) < 0.05


def test_spectrally_positive_stable_positivity_probability():
    x = StableExact(1.5, 1.0).sample(RngStream(14).generator, 400_000)
    assert np.mean(x >= 0) == pytest.approx(1 / 3, abs=4 * math.sqrt(2 / 9 / 4e5))


def test_lattice_three_point_sampler_frequencies():
    m = Lattice([-3, -1, 2], [Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)])
    x = m.sample(RngStream(15).generator, 400_000)
    for s, p in zip(m.support, m.float_probs):
        assert np.mean(x == s) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / 4e5))


@pytest.mark.parametrize("model", MODELS)
def test_sampling_is_deterministic_per_stream(model):
    a = model.sample(RngStream(1, 7).generator, 1000)
    b = model.sample(RngStream(1, 7).generator, 1000)
    assert np.array_equal(a, b)
    assert sample_increment(model, RngStream(2)) == sample_increment(model, RngStream(2))


@pytest.mark.parametrize("spec", [
    {"kind": "lattice", "support": [-1, 1], "probs": [0.5, 0.5]},
    {"kind": "stable", "alpha": 1.5, "beta": 1.0, "scale": 1.0},
    {"kind": "pareto", "alpha": 1.5, "weight_right": 1.0},
])
def test_model_dict_round_trip(spec):
    m = model_from_dict(spec)
    assert model_from_dict(m.to_dict()) == m


def test_model_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        model_from_dict({"kind": "gamma"})
    with pytest.raises(ValueError):
        model_from_dict({"kind": "stable", "alpha": 1.5, "colour": "red"})
