"""Doob h-transform of a lattice walk killed below 0, and estimators built on it.

The conditioned chain on ``{0, 1, 2, ...}`` moves from ``x`` to ``y = x + s``
with probability ``P(X = s) h(y) / h(x)``; ``h`` is the exact renewal
function from :mod:`curvewalk.oracle`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boundary import Boundary, Kind, lower_level
from .curves import fmt
from .increments import Lattice
from .oracle import ExactRenewal, lattice_renewal
from .rng import Estimate, RngStream, as_generator, as_stream, chunked, merge_all


@dataclass(frozen=True)
class ConditionedKernel:
    """Transition law of the h-transformed walk on ``0..x_max``.

    ``cdf[x]`` is the cumulative row over the model's support order, so a
    uniform draw ``u`` selects step ``support[(u > cdf[x]).sum()]``.
    """

    model: Lattice
    h: np.ndarray
    x_max: int
    probs: np.ndarray
    cdf: np.ndarray

    def row(self, x: int) -> dict:
        return kernel_row(self, x)

    def covers(self, start: int, n: int) -> bool:
        return start + n * self.model.support[-1] <= self.x_max

    def to_csv(self, path=None, x_range: Sequence[int] | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "prob"])
        for x in (range(self.x_max + 1) if x_range is None else x_range):
            for y, p in kernel_row(self, x).items():
                w.writerow([fmt(x), fmt(y), fmt(p)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def build_kernel(model: Lattice, x_max: int, h: ExactRenewal | None = None) -> ConditionedKernel:
    """Kernel rows for states ``0..x_max`` (``h`` is computed up to ``x_max + max step``)."""
    if not isinstance(model, Lattice):
        raise TypeError("the conditioned kernel is only available for lattice models")
    top = x_max + model.support[-1]
    if h is None:
        h = lattice_renewal(model, top)
    H = np.asarray(h.values if isinstance(h, ExactRenewal) else h, dtype=float)
    if H.size <= top:
        raise ValueError("h does not cover x_max + max step")
    x = np.arange(x_max + 1)
    sup = np.asarray(model.support)
    y = x[:, None] + sup[None, :]
    hy = np.where(y >= 0, H[np.clip(y, 0, top)], 0.0)
    P = model.float_probs[None, :] * hy / H[x][:, None]
    cdf = np.cumsum(P, axis=1)
    return ConditionedKernel(model, H[: top + 1], x_max, P, cdf)


def kernel_row(kernel: ConditionedKernel, x: int) -> dict:
    """``{y: p^h(x, y)}`` over reachable ``y >= 0``."""
    if not 0 <= x <= kernel.x_max:
        raise ValueError(f"state {x} outside kernel range [0, {kernel.x_max}]")
    return {int(x + s): float(p) for s, p in zip(kernel.model.support, kernel.probs[x]) if x + s >= 0 and p > 0}


def _advance(kernel: ConditionedKernel, X: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    sup = np.asarray(kernel.model.support)
    u = gen.random(X.size)
    c = kernel.cdf[X]
    k = (u[:, None] > c[:, :-1]).sum(axis=1)
    return X + sup[k]


def simulate_conditioned(kernel: ConditionedKernel, start: int, horizon: int, rng,
                         checkpoints: Sequence[int] | None = None) -> dict:
    """One trajectory of the conditioned chain, recorded at ``checkpoints`` (default: every step)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not kernel.covers(start, horizon):
        raise ValueError("kernel range too small for this horizon")
    gen = as_generator(rng)
    want = set(range(horizon + 1)) if checkpoints is None else {int(c) for c in checkpoints}
    X = np.array([start])
    out = {0: start} if 0 in want else {}
    for t in range(1, horizon + 1):
        X = _advance(kernel, X, gen)
        if t in want:
            out[t] = int(X[0])
    return out


def _run(kernel: ConditionedKernel, g: Boundary | None, n_grid: np.ndarray, size: int,
         gen: np.random.Generator, start: int, weights: bool):
    """Survival indicators (and ``h(start)/h(S_n)`` weights) on ``n_grid`` for ``size`` chains."""
    level = lower_level(g, Kind.SHRINKING)
    n_max = int(n_grid[-1])
    lev = np.asarray(level(np.arange(n_max + 1)), dtype=float)
    X = np.full(size, start, dtype=np.int64)
    idx = np.arange(size)
    out = np.zeros((n_grid.size, size))
    h0 = kernel.h[start]
    gi = 0
    if n_grid[0] == 0:
        out[0] = 1.0
        gi = 1
    for t in range(1, n_max + 1):
        if idx.size == 0:
            break
        X = _advance(kernel, X, gen)
        ok = X >= lev[t]
        if not ok.all():
            X, idx = X[ok], idx[ok]
        if gi < n_grid.size and t == n_grid[gi]:
            out[gi, idx] = h0 / kernel.h[X] if weights else 1.0
            gi += 1
    return out


@dataclass
class NeverCrossTable:
    """``P^h(T^_g > N)`` on dyadic ``N`` with the plateau diagnostics."""

    N: np.ndarray
    values: list[Estimate]
    start: int
    flat_tol: float = 0.05

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.values])

    @property
    def drops(self) -> np.ndarray:
        """Relative drop between consecutive grid points."""
        m = self.means
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m[:-1] > 0, 1 - m[1:] / m[:-1], np.nan)

    @property
    def last_drop(self) -> float:
        return float(self.drops[-1])

    @property
    def plateau(self) -> bool:
        """Positive last value and last relative drop below ``flat_tol``."""
        return bool(self.means[-1] > 0 and self.last_drop < self.flat_tol)


def _kernel_for(kernel: ConditionedKernel, start: int, n: int) -> ConditionedKernel:
    if kernel.covers(start, n):
        return kernel
    return build_kernel(kernel.model, start + n * kernel.model.support[-1])


def estimate_never_cross(kernel: ConditionedKernel, g: Boundary | None, N_grid: Sequence[int],
                         n_paths: int, rng, start: int = 0, workers: int = 1) -> NeverCrossTable:
    """Monte Carlo ``P^h_start(T^_g > N)`` on ``N_grid`` from coupled chains (nonincreasing by construction)."""
    N = np.asarray(N_grid, dtype=np.int64)
    k = _kernel_for(kernel, start, int(N[-1]))
    stream = as_stream(rng)

    def one(s: RngStream, size: int):
        return _run(k, g, N, size, s.generator, start, weights=False)

    ind = np.concatenate(chunked(stream, n_paths, one, workers), axis=1)
    return NeverCrossTable(N, [Estimate.from_samples(r, stream.master_seed) for r in ind], start)


def importance_survival(kernel: ConditionedKernel, g: Boundary | None, n, n_paths: int, rng,
                        start: int = 0, workers: int = 1):
    """Unbiased ``P(T^_g > n)`` (``P(T_0 > n)`` when ``g`` is None) by change of measure.

    Averages ``h(start) / h(S_n) 1{T^_g > n}`` over conditioned chains.
    ``n`` may be an integer (returns an :class:`Estimate`) or a grid (returns
    a list of estimates from common chains).
    """
    scalar = np.ndim(n) == 0
    grid = np.atleast_1d(np.asarray(n, dtype=np.int64))
    k = _kernel_for(kernel, start, int(grid[-1]))
    stream = as_stream(rng)

    def one(s: RngStream, size: int):
        w = _run(k, g, grid, size, s.generator, start, weights=True)
        return [Estimate.from_samples(row) for row in w]

    parts = chunked(stream, n_paths, one, workers)
    ests = [merge_all(p[i] for p in parts) for i in range(grid.size)]
    ests = [Estimate(e.n, e.mean, e.m2, stream.master_seed) for e in ests]
    return ests[0] if scalar else ests
