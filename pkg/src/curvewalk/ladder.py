"""Strict descending ladder pairs, the renewal function ``h`` and tail diagnostics of ``T_0``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .curves import SurvivalCurve
from .increments import IncrementModel, Lattice, norming_c
from .renewal import RenewalTable
from .rng import Estimate, RngStream, as_stream, chunked, merge_all
from .walk import endpoint_sums, run_walks, simulate_walks

DEFAULT_LADDER_HORIZON = 10**7


def _zero(t):
    return np.zeros(np.shape(t))


@dataclass(frozen=True)
class LadderRecord:
    """One strict descending ladder pair ``(tau, chi) = (T_0, -S_{T_0})``.

    A censored record carries the horizon in ``tau`` and ``chi = None``.
    """

    tau: int
    chi: float | None
    censored: bool = False

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("ladder epoch must be >= 1")
        if not self.censored and not (self.chi is not None and self.chi > 0):
            raise ValueError("an uncensored ladder height must be positive")
        if self.censored and self.chi is not None:
            raise ValueError("a censored record has no height")


@dataclass
class LadderSample:
    tau: np.ndarray
    chi: np.ndarray
    censored: np.ndarray
    horizon: int

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean()) if self.tau.size else 0.0

    def records(self) -> list[LadderRecord]:
        return [LadderRecord(int(t), None if c else float(x), bool(c))
                for t, x, c in zip(self.tau, self.chi, self.censored)]


def simulate_ladders(model: IncrementModel, n_records: int, horizon: int, rng,
                     workers: int = 1) -> LadderSample:
    """Independent copies of ``(T_0, -S_{T_0})``, censored at ``horizon``."""
    b = run_walks(model, n_records, horizon, [_zero], rng, workers=workers)
    tau = b.exit_times[0]
    cens = tau > horizon
    tau = np.where(cens, horizon, tau)
    chi = np.where(cens, np.nan, -b.exit_values[0])
    return LadderSample(tau, chi, cens, horizon)


def simulate_ladder(model: IncrementModel, horizon: int, rng) -> LadderRecord:
    """A single ladder pair; runs until ``S_n < 0`` or ``n = horizon``."""
    return simulate_ladders(model, 1, horizon, rng).records()[0]


class CensoringError(RuntimeError):
    pass


def estimate_renewal_h(model: IncrementModel, grid: Sequence[float], n_paths: int, rng,
                       horizon: int = DEFAULT_LADDER_HORIZON, workers: int = 1,
                       max_censored: float = 1e-3) -> RenewalTable:
    """Monte Carlo ``h(x) = E sigma(x)`` with ``sigma(x) = min{k : chi_1 + ... + chi_k > x}``.

    Each sample chains independent ladder heights until their sum exceeds
    ``max(grid)``; every grid point reads ``sigma`` off the same chain, so the
    table is monotone by construction.  Samples that hit a censored ladder
    record are dropped and counted; more than ``max_censored`` censored
    records raises :class:`CensoringError`.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing and start at 0")
    top = float(grid[-1])

    def one(stream: RngStream, size: int):
        sigma = np.ones((grid.size, size))
        total = np.zeros(size)
        alive = np.ones(size, dtype=bool)
        bad = np.zeros(size, dtype=bool)
        n_rec = n_cens = 0
        rnd = 0
        while alive.any():
            act = np.flatnonzero(alive)
            lad = simulate_walks(model, act.size, horizon, [_zero], stream.child(rnd))
            rnd += 1
            cens = lad.exit_times[0] > horizon
            n_rec += act.size
            n_cens += int(cens.sum())
            bad[act[cens]] = True
            alive[act[cens]] = False
            ok = act[~cens]
            total[ok] += -lad.exit_values[0][~cens]
            # sigma(x) counts the heights needed to exceed x
            sigma[:, ok] += total[None, ok] <= grid[:, None]
            alive[ok] = total[ok] <= top
        return sigma[:, ~bad], n_rec, n_cens, int(bad.sum())

    parts = chunked(rng, n_paths, one, workers)
    n_rec = sum(p[1] for p in parts)
    n_cens = sum(p[2] for p in parts)
    if n_cens > max_censored * n_rec:
        raise CensoringError(f"{n_cens} of {n_rec} ladder records censored at horizon {horizon}")
    sig = np.concatenate([p[0] for p in parts], axis=1)
    est = [Estimate.from_samples(row) for row in sig]
    values = np.array([e.mean for e in est])
    stderr = np.array([e.stderr for e in est])
    values[0], stderr[0] = 1.0, 0.0
    return RenewalTable(grid, values, stderr, int(sig.shape[1]), censored=sum(p[3] for p in parts))


def harmonicity_residual(model: Lattice, h, x: int) -> float:
    """``E[h(x+X); x+X >= 0] - h(x)`` for an exact lattice ``h``.

    ``h`` is indexable on nonnegative integers (array or callable); the walk
    is killed on ``{x + X < 0}``, matching ``T_0 = min{n : S_n < 0}``.
    """
    if not isinstance(model, Lattice):
        raise TypeError("harmonicity residual needs a lattice model")
    H = h if callable(h) else (lambda y: np.asarray(h)[y])
    acc = math.fsum(float(p) * float(H(x + s)) for s, p in zip(model.support, model.probs) if x + s >= 0)
    return acc - float(H(x))


def survival_T0(model: IncrementModel, n_grid: Sequence[int], n_paths: int, rng,
                workers: int = 1) -> SurvivalCurve:
    """Monte Carlo ``P(T_0 > n)`` on ``n_grid`` from one pass per path."""
    from .passage import survival_curves

    return survival_curves(model, [None], "zero", n_grid, n_paths, rng, workers)[0]


# ---------------------------------------------------------------------------
# tail fits


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class TailFit:
    exponent: float
    amplitude: float
    window: tuple[int, int]
    residual: float


def fit_tail(curve: SurvivalCurve, window: tuple[int, int]) -> TailFit:
    """Least-squares fit of ``log P(T_0 > n)`` against ``log n`` at dyadic ``n`` in ``window``.

    Raises :class:`FitError` on non-monotone input, fewer than four dyadic
    points, a nonpositive probability or an exponent outside ``(-1, 0)``.
    """
    lo, hi = window
    n = curve.n
    if np.any(np.diff(curve.prob) > 0):
        raise FitError("survival curve is not nonincreasing")
    sel = (n >= lo) & (n <= hi) & (n > 0) & ((n & (n - 1)) == 0)
    if sel.sum() < 4:
        raise FitError("need at least 4 dyadic grid points inside the window")
    x, y = np.log(n[sel].astype(float)), curve.prob[sel]
    if np.any(y <= 0):
        raise FitError("nonpositive probability inside the window")
    slope, icpt = np.polyfit(x, np.log(y), 1)
    if not -1 < slope < 0 or np.allclose(y, y[0]):
        raise FitError(f"fitted exponent {slope:.4g} is outside (-1, 0)")
    fitted = np.exp(icpt + slope * x)
    resid = float(np.max(np.abs(fitted / y - 1)))
    return TailFit(float(slope), float(np.exp(icpt)), (int(lo), int(hi)), resid)


def spitzer_positivity(model: IncrementModel, n: int, n_paths: int, rng, workers: int = 1) -> Estimate:
    """Monte Carlo estimate of ``P(S_n >= 0)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    stream = as_stream(rng)

    def one(s: RngStream, size: int) -> Estimate:
        return Estimate.from_samples(endpoint_sums(model, n, size, s.generator) >= 0)

    est = merge_all(chunked(stream, n_paths, one, workers))
    return Estimate(est.n, est.mean, est.m2, stream.master_seed)


@dataclass(frozen=True)
class TailConsistency:
    x: np.ndarray
    product: np.ndarray
    stderr: np.ndarray
    variation: float

    @property
    def last(self) -> float:
        return float(self.product[-1])


def tail_consistency(model: IncrementModel, x_grid: Sequence[int], n_paths: int, rng,
                     h: Callable, workers: int = 1) -> TailConsistency:
    """``P(tau > x) h(c(x))`` on ``x_grid`` and its max/min ratio."""
    x = np.asarray(x_grid, dtype=np.int64)
    curve = survival_T0(model, x, n_paths, rng, workers)
    hc = np.array([float(h(norming_c(model, float(v)))) for v in x])
    prod = curve.prob * hc
    return TailConsistency(x, prod, curve.stderr * hc, float(prod.max() / prod.min()))
