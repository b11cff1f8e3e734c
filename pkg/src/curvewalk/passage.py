"""First-passage times over moving boundaries, the ladder decomposition and ``V(g)`` traces.

``T_g = min{n >= 1 : S_n < -g(n)}`` (kind ``lower``) and
``T^_g = min{n >= 1 : S_n < g(n)}`` (kind ``shrinking``).  Estimates for
several boundaries requested together are computed on common paths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boundary import Boundary, Kind, lower_level
from .curves import SurvivalCurve
from .increments import IncrementModel
from .ladder import LadderRecord
from .rng import Estimate, as_stream
from .walk import run_walks, simulate_walks


@dataclass(frozen=True)
class PassageOutcome:
    """Crossing time (``None`` with ``censored`` set when the horizon is reached first)."""

    time: int | None
    kind: Kind
    overshoot: float | None
    horizon: int
    recorded_states: dict = field(default_factory=dict)

    @property
    def censored(self) -> bool:
        return self.time is None


def passage_time_of_path(steps: Sequence[float], g: Boundary | None, kind=Kind.LOWER) -> int | None:
    """Crossing time of one given increment sequence, or None if it never crosses."""
    level = lower_level(g, kind)
    S = np.cumsum(np.asarray(steps, dtype=float))
    t = np.arange(1, S.size + 1)
    below = S < level(t)
    return int(t[below.argmax()]) if below.any() else None


def simulate_passage(model: IncrementModel, g: Boundary | None, kind, horizon: int, rng,
                     checkpoints: Sequence[int] = ()) -> PassageOutcome:
    kind = Kind(kind)
    level = lower_level(g, kind)
    b = simulate_walks(model, 1, horizon, [level], rng, checkpoints)
    t = int(b.exit_times[0, 0])
    rec = {int(c): float(s) for c, s in zip(b.checkpoints, b.states[:, 0]) if not math.isnan(s)}
    if t > horizon:
        return PassageOutcome(None, kind, None, horizon, rec)
    over = float(b.exit_values[0, 0] - level(np.array([t]))[0])
    return PassageOutcome(t, kind, over, horizon, rec)


@dataclass
class PassageSample:
    """Coupled crossing times, one row per boundary; ``horizon + 1`` marks censoring."""

    times: np.ndarray
    kind: Kind
    horizon: int
    stream: tuple | None


def simulate_passages(model: IncrementModel, gs: Sequence[Boundary | None], kind, horizon: int,
                      n_paths: int, rng, workers: int = 1) -> PassageSample:
    kind = Kind(kind)
    levels = [lower_level(g, kind) for g in gs]
    b = run_walks(model, n_paths, horizon, levels, rng, workers=workers)
    return PassageSample(b.exit_times, kind, horizon, b.stream)


# ---------------------------------------------------------------------------
# ladder decomposition


@dataclass(frozen=True)
class LadderDecomposition:
    """``nu`` and the reconstruction ``sum_{k <= nu} tau_k`` for one path.

    ``T_direct`` is the crossing time read off the same path; both are None
    when the path is censored.
    """

    nu: int | None
    ladder: tuple[LadderRecord, ...]
    T_reconstructed: int | None
    T_direct: int | None

    @property
    def censored(self) -> bool:
        return self.T_direct is None


def _decompose(epochs: np.ndarray, values: np.ndarray, g: Boundary | None):
    """First ladder index whose cumulative height exceeds g at the cumulative epoch."""
    chi_sum = -values
    gv = np.zeros(epochs.size) if g is None or g.is_zero else np.asarray(g(epochs), dtype=float)
    ok = chi_sum > gv
    if not ok.any():
        return None, None
    k = int(ok.argmax())
    return k + 1, int(epochs[k])


def _records(epochs: np.ndarray, values: np.ndarray) -> tuple[LadderRecord, ...]:
    tau = np.diff(np.concatenate([[0], epochs]))
    chi = -np.diff(np.concatenate([[0.0], values]))
    return tuple(LadderRecord(int(t), float(c)) for t, c in zip(tau, chi))


def ladder_decomposition(model: IncrementModel, g: Boundary | None, horizon: int, rng) -> LadderDecomposition:
    """Run one path, extract its ladder pairs and reconstruct ``T_g`` from them."""
    return ladder_decompositions(model, [g], 1, horizon, rng)[0][0]


def ladder_decompositions(model: IncrementModel, gs: Sequence[Boundary | None], n_paths: int,
                          horizon: int, rng, workers: int = 1) -> list[list[LadderDecomposition]]:
    """Decompositions for every boundary on common paths: ``out[j][i]`` is boundary ``j``, path ``i``."""
    levels = [lower_level(g, Kind.LOWER) for g in gs]
    b = run_walks(model, n_paths, horizon, levels, rng, track_ladders=True, workers=workers)
    bounds = np.searchsorted(b.ladder_path, np.arange(n_paths + 1))
    out = [[] for _ in gs]
    for i in range(n_paths):
        e = b.ladder_epoch[bounds[i]:bounds[i + 1]]
        v = b.ladder_value[bounds[i]:bounds[i + 1]]
        for j, g in enumerate(gs):
            t = int(b.exit_times[j, i])
            direct = None if t > horizon else t
            nu, rec_t = _decompose(e, v, g)
            lad = _records(e[:nu], v[:nu]) if nu else _records(e, v)
            out[j].append(LadderDecomposition(nu, lad, rec_t, direct))
    return out


@dataclass(frozen=True)
class IdentityCheck:
    n_paths: int
    matches: int
    censored: int

    @property
    def fraction(self) -> float:
        return self.matches / self.n_paths


def check_ladder_identity(model: IncrementModel, gs: Sequence[Boundary | None], n_paths: int,
                          horizon: int, rng, workers: int = 1) -> list[IdentityCheck]:
    """Fraction of paths where the ladder reconstruction equals the direct ``T_g``.

    Vectorised version of :func:`ladder_decompositions`; censored paths match
    when both sides are censored.
    """
    levels = [lower_level(g, Kind.LOWER) for g in gs]
    b = run_walks(model, n_paths, horizon, levels, rng, track_ladders=True, workers=workers)
    out = []
    for j, g in enumerate(gs):
        gv = np.zeros(b.ladder_epoch.size) if g is None or g.is_zero else np.asarray(g(b.ladder_epoch), dtype=float)
        ok = -b.ladder_value > gv
        recon = np.full(n_paths, horizon + 1, dtype=np.int64)
        # first qualifying ladder point per path: records are sorted by (path, epoch)
        p, e = b.ladder_path[ok], b.ladder_epoch[ok]
        first = np.unique(p, return_index=True)
        recon[first[0]] = e[first[1]]
        direct = b.exit_times[j]
        out.append(IdentityCheck(n_paths, int((recon == direct).sum()), int((direct > horizon).sum())))
    return out


@dataclass(frozen=True)
class NuSummary:
    """Summary of ``nu`` with censoring; ``estimate`` is None when censoring exceeds 1%."""

    estimate: Estimate | None
    censored_fraction: float
    horizons: tuple[int, ...]
    truncated_means: tuple[float, ...]
    infinite_mean_flag: bool


def estimate_E_nu(model: IncrementModel, g: Boundary | None, horizon: int, n_paths: int, rng,
                  workers: int = 1, max_censored: float = 0.01, growth_tol: float = 0.01) -> NuSummary:
    """Monte Carlo ``E nu`` with a growth monitor over horizon doublings.

    ``truncated_means[k]`` is the mean over all paths of the number of ladder
    epochs up to ``min(T_g, H_k)`` for ``H_k = horizon / 2**(3-k)``.  The
    infinite-mean flag is raised when this keeps growing by more than
    ``growth_tol`` over the last doubling.
    """
    level = lower_level(g, Kind.LOWER)
    b = run_walks(model, n_paths, horizon, [level], rng, track_ladders=True, workers=workers)
    T = b.exit_times[0]
    horizons = tuple(max(1, horizon >> k) for k in (3, 2, 1, 0))
    T_of = T[b.ladder_path]
    means = []
    for H in horizons:
        cnt = np.bincount(b.ladder_path[(b.ladder_epoch <= H) & (b.ladder_epoch <= T_of)], minlength=n_paths)
        means.append(float(cnt.mean()))
    cens = float((T > horizon).mean())
    growth = (means[-1] - means[-2]) / means[-2] if means[-2] > 0 else math.inf
    flag = bool(growth > growth_tol)
    est = None
    if cens <= max_censored:
        nu = np.bincount(b.ladder_path[b.ladder_epoch <= T_of], minlength=n_paths)[T <= horizon]
        est = Estimate.from_samples(nu, as_stream(rng).master_seed)
    return NuSummary(est, cens, horizons, tuple(means), flag)


# ---------------------------------------------------------------------------
# survival curves and V traces


def survival_curves(model: IncrementModel, gs: Sequence[Boundary | None], kind, n_grid: Sequence[int],
                    n_paths: int, rng, workers: int = 1) -> list[SurvivalCurve]:
    """Coupled Monte Carlo ``P(T > n)`` for each boundary in ``gs``."""
    kind = Kind(kind)
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if np.any(np.diff(n_grid) <= 0) or n_grid[0] < 0:
        raise ValueError("n_grid must be increasing and nonnegative")
    levels = [lower_level(g, kind) for g in gs]
    b = run_walks(model, n_paths, int(max(n_grid[-1], 1)), levels, rng, workers=workers)
    out = []
    for j, g in enumerate(gs):
        ind = b.survival(j, n_grid)
        p = ind.mean(axis=1)
        se = np.sqrt(p * (1 - p) / max(n_paths - 1, 1))
        label = "" if g is None else repr(g)
        out.append(SurvivalCurve(n_grid, p, se, "mc", n_paths, b.stream, label=label))
    return out


def survival_curve(model: IncrementModel, g: Boundary | None, kind, n_grid: Sequence[int],
                   n_paths: int, rng, workers: int = 1) -> SurvivalCurve:
    return survival_curves(model, [g], kind, n_grid, n_paths, rng, workers)[0]


class Variant(str, enum.Enum):
    SUB = "sub"
    SUPER = "super"


@dataclass
class VgTrace:
    n_grid: np.ndarray
    values: list[Estimate]
    variant: Variant

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.values])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.values])

    def monotone_violation(self, k: float = 3.0) -> float:
        """Largest step against the expected direction, in units of the combined stderr."""
        m, s = self.means, self.stderrs
        d = np.diff(m) if self.variant == Variant.SUB else -np.diff(m)
        se = np.sqrt(s[1:] ** 2 + s[:-1] ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, -d / se, np.where(d < -1e-12, np.inf, 0.0))
        return float(z.max()) if z.size else 0.0

    def is_monotone(self, k: float = 3.0) -> bool:
        return self.monotone_violation() <= k

    @property
    def final_gap(self) -> float:
        m = self.means
        return float(abs(m[-1] - m[-2]) / abs(m[-1]))

    @property
    def v_estimate(self) -> Estimate:
        return self.values[-1]

    def to_csv(self, path=None) -> str:
        from .curves import fmt

        lines = ["n,value,stderr"] + [f"{fmt(n)},{fmt(e.mean)},{fmt(e.stderr)}"
                                      for n, e in zip(self.n_grid, self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def estimate_V(model: IncrementModel, g: Boundary | None, variant: str, h: Callable,
               n_grid: Sequence[int], n_paths: int, rng, workers: int = 1) -> VgTrace:
    """Per ``n``, the mean of ``h(S_n + g(n)) 1{T_g > n}`` (``sub``) or
    ``h(S_n - g(n)) 1{T^_g > n}`` (``super``).

    ``h`` must be zero on negative arguments; a :class:`RenewalFunction`
    raises if asked to extrapolate beyond its allowed range.
    """
    variant = Variant(str(getattr(variant, "value", variant)).lower())
    kind = Kind.LOWER if variant == Variant.SUB else Kind.SHRINKING
    sign = 1.0 if variant == Variant.SUB else -1.0
    n_grid = np.asarray(n_grid, dtype=np.int64)
    level = lower_level(g, kind)
    b = run_walks(model, n_paths, int(n_grid[-1]), [level], rng, checkpoints=n_grid, workers=workers)
    seed = as_stream(rng).master_seed
    gv = np.zeros(n_grid.size) if g is None or g.is_zero else np.asarray(g(n_grid), dtype=float)
    vals = []
    for k, n in enumerate(n_grid):
        alive = b.exit_times[0] > n
        y = np.zeros(n_paths)
        if alive.any():
            y[alive] = np.asarray(h(b.states[k, alive] + sign * gv[k]), dtype=float)
        vals.append(Estimate.from_samples(y, seed))
    return VgTrace(n_grid, vals, variant)
