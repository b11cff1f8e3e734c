"""Step distributions in the domain of attraction of a stable law.

Three families are supported:

* :class:`Lattice` -- finitely supported integer steps (finite variance, so
  ``alpha = 2, beta = 0``).  Exact rational probabilities are kept for the
  dynamic-programming oracle.
* :class:`StableExact` -- strictly stable steps drawn with the
  Chambers-Mallows-Stuck trigonometric sampler (S1 parametrisation).
* :class:`ParetoTails` -- a two-sided Pareto mixture, mean-centred when the
  mean exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Sequence

import numpy as np
from scipy import special

from .rng import RngStream, as_generator


class DomainError(ValueError):
    """Parameters outside the admissible set of (alpha, beta)."""


def is_admissible(alpha: float, beta: float) -> bool:
    if 0 < alpha < 1:
        return abs(beta) < 1
    if 1 < alpha < 2:
        return abs(beta) <= 1
    if alpha in (1, 2):
        return beta == 0
    return False


def positivity_index(alpha: float, beta: float) -> float:
    """Limit of ``P(S_n >= 0)`` for a walk attracted to the (alpha, beta) stable law.

    Returns 1/2 for ``alpha = 1`` and otherwise
    ``1/2 + arctan(beta * tan(pi*alpha/2)) / (pi*alpha)``.
    """
    if not is_admissible(alpha, beta):
        raise DomainError(f"(alpha, beta) = ({alpha}, {beta}) is not admissible")
    if alpha == 1 or beta == 0:
        return 0.5
    if beta < 0:
        # computed by reflection so that rho(a, -b) == 1 - rho(a, b) holds bit-exactly
        return 1.0 - positivity_index(alpha, -beta)
    return 0.5 + math.atan(beta * math.tan(math.pi * alpha / 2)) / (math.pi * alpha)


class IncrementModel:
    """Base class: law of a single step ``X``."""

    kind: str = ""
    alpha: float
    beta: float

    @property
    def rho(self) -> float:
        return positivity_index(self.alpha, self.beta)

    @property
    def is_lattice(self) -> bool:
        return False

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def truncated_second_moment(self, u):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # sup_{v >= u} mu(v); the eventually-decreasing branch used for norming
    def _mu_envelope(self, u: float) -> float:
        return max(float(self.truncated_second_moment(u)), self._suffix_max(u))

    @cached_property
    def _envelope_grid(self) -> tuple[np.ndarray, np.ndarray]:
        grid = np.logspace(-8, 14, 4401)
        mu = np.asarray(self.truncated_second_moment(grid), dtype=float)
        suffix = np.maximum.accumulate(mu[::-1])[::-1]
        return grid, suffix

    def _suffix_max(self, u: float) -> float:
        grid, suffix = self._envelope_grid
        i = int(np.searchsorted(grid, u, side="right"))
        return float(suffix[i]) if i < grid.size else 0.0

    @property
    def _u_min(self) -> float:
        return 0.0


def _fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    if isinstance(p, (int, np.integer)):
        return Fraction(int(p))
    f = Fraction(float(p)).limit_denominator(2**24)
    if abs(float(f) - float(p)) > 1e-15:
        f = Fraction(float(p))
    return f


@dataclass(frozen=True)
class Lattice(IncrementModel):
    """Integer-valued steps with finite support.

    ``require_centered=False`` admits drifting walks; these are only usable by
    drift-agnostic routines (Sparre Andersen / dynamic programming).
    """

    support: tuple[int, ...]
    probs: tuple[Fraction, ...]
    require_centered: bool = True
    kind: str = field(default="lattice", init=False, repr=False)

    def __init__(self, support: Sequence[int], probs: Sequence, require_centered: bool = True):
        sup = [int(s) for s in support]
        if any(float(s) != s for s in support):
            raise ValueError("lattice support must be integers")
        fr = [_fraction(p) for p in probs]
        if len(sup) != len(fr) or not sup:
            raise ValueError("support and probs must be non-empty and of equal length")
        if len(set(sup)) != len(sup):
            raise ValueError("support values must be distinct")
        if any(p < 0 for p in fr):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(sum(fr)) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {float(sum(fr))}, not 1")
        pairs = sorted((s, p) for s, p in zip(sup, fr) if p > 0)
        object.__setattr__(self, "support", tuple(s for s, _ in pairs))
        object.__setattr__(self, "probs", tuple(p for _, p in pairs))
        object.__setattr__(self, "require_centered", bool(require_centered))
        if require_centered and abs(self.mean) > 1e-12:
            raise ValueError(f"lattice mean is {self.mean}, expected 0")
        if len(self.support) < 2 or self.support[0] >= 0 or self.support[-1] <= 0:
            if require_centered:
                raise ValueError("a centred lattice walk needs both negative and positive steps")

    @classmethod
    def rademacher(cls) -> "Lattice":
        return cls([-1, 1], [Fraction(1, 2), Fraction(1, 2)])

    @property
    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @property
    def mean(self) -> float:
        return float(sum(s * p for s, p in zip(self.support, self.probs)))

    @property
    def is_centered(self) -> bool:
        return abs(self.mean) <= 1e-12

    @property
    def denominator(self) -> int:
        return reduce(math.lcm, (p.denominator for p in self.probs), 1)

    @property
    def alpha(self) -> float:
        return 2.0

    @property
    def beta(self) -> float:
        return 0.0

    @property
    def rho(self) -> float:
        if not self.is_centered:
            raise DomainError("a drifting walk has no positivity index in (0, 1)")
        return 0.5

    @property
    def is_lattice(self) -> bool:
        return True

    @property
    def span(self) -> int:
        return reduce(math.gcd, (abs(s) for s in self.support))

    @cached_property
    def _cdf(self) -> np.ndarray:
        c = np.cumsum(self.float_probs)
        c[-1] = 1.0
        return c

    def sample(self, gen, size) -> np.ndarray:
        sup = np.asarray(self.support, dtype=float)
        u = gen.random(size)
        if sup.size == 2:
            return np.where(u < self._cdf[0], sup[0], sup[1])
        return sup[np.searchsorted(self._cdf, u, side="right")]

    def truncated_second_moment(self, u):
        u = np.asarray(u, dtype=float)
        sup = np.asarray(self.support, dtype=float)
        w = self.float_probs * sup**2
        inside = np.abs(sup)[None, :] < u.reshape(-1, 1)
        out = (inside * w).sum(axis=1) / u.ravel() ** 2
        return out.reshape(u.shape) if u.ndim else float(out[0])

    def _mu_envelope(self, u: float) -> float:
        sup = np.abs(np.asarray(self.support, dtype=float))
        w = self.float_probs * sup**2
        best = float(self.truncated_second_moment(u))
        for r in np.unique(sup[sup >= u]):
            if r > 0:
                best = max(best, float(w[sup <= r].sum()) / r**2)
        return best

    @property
    def _u_min(self) -> float:
        return float(min(abs(s) for s in self.support if s != 0))

    def to_dict(self) -> dict:
        return {"kind": "lattice", "support": list(self.support),
                "probs": [str(p) for p in self.probs],
                **({} if self.require_centered else {"require_centered": False})}


def _stable_tail_constant(alpha: float) -> float:
    # P(|X| > x) ~ C_alpha * scale**alpha * x**(-alpha) for the S1 parametrisation
    if alpha == 1:
        return 2.0 / math.pi
    return (1 - alpha) / (math.gamma(2 - alpha) * math.cos(math.pi * alpha / 2))


@dataclass(frozen=True)
class StableExact(IncrementModel):
    """Strictly stable steps, characteristic function
    ``exp(-scale**alpha |t|**alpha (1 - i beta sign(t) tan(pi alpha / 2)))``.

    The truncated second moment uses the exact Gaussian formula at
    ``alpha = 2`` and the pure power-tail surrogate
    ``C_alpha scale**alpha alpha / (2 - alpha) u**(-alpha)`` otherwise.
    """

    alpha: float
    beta: float = 0.0
    scale: float = 1.0
    kind: str = field(default="stable", init=False, repr=False)

    def __post_init__(self):
        if not is_admissible(self.alpha, self.beta):
            raise DomainError(f"(alpha, beta) = ({self.alpha}, {self.beta}) is not admissible")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def sample(self, gen, size) -> np.ndarray:
        a, b = self.alpha, self.beta
        if a == 2:
            # the trigonometric formula collapses to 2 sin(V) sqrt(W), which is N(0, 2)
            x = gen.standard_normal(size)
            x *= self.scale * math.sqrt(2.0)
            return x
        v = np.pi * (gen.random(size) - 0.5)
        if a == 1:
            return self.scale * np.tan(v)
        w = gen.standard_exponential(size)
        zeta = b * math.tan(math.pi * a / 2)
        shift = math.atan(zeta) / a
        amp = (1 + zeta * zeta) ** (1 / (2 * a))
        t = v + shift
        t *= a
        x = np.sin(t)
        # log of cos(v - t)**((1-a)/a) * w**(-(1-a)/a) * cos(v)**(-1/a), in place
        e = np.subtract(v, t, out=t)
        np.cos(e, out=e)
        np.log(e, out=e)
        np.log(w, out=w)
        e -= w
        e *= (1 - a) / a
        np.cos(v, out=v)
        np.log(v, out=v)
        v *= 1 / a
        e -= v
        np.exp(e, out=e)
        x *= e
        x *= amp * self.scale
        return x

    def truncated_second_moment(self, u):
        u = np.asarray(u, dtype=float)
        a, s = self.alpha, self.scale
        if a == 2:
            sd = s * math.sqrt(2.0)
            z = u / sd
            m = sd**2 * (special.erf(z / math.sqrt(2)) - 2 * z * np.exp(-z * z / 2) / math.sqrt(2 * math.pi))
            out = m / u**2
        else:
            k = _stable_tail_constant(a) * s**a * a / (2 - a)
            out = k * u ** (-a)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"kind": "stable", "alpha": self.alpha, "beta": self.beta, "scale": self.scale}


def _power_integral(k: float, lo, hi):
    """Integral of y**k over [lo, hi] (elementwise, zero where hi <= lo)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.maximum(np.asarray(hi, dtype=float), lo)
    if abs(k + 1) < 1e-14:
        return np.log(hi / lo)
    return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)


@dataclass(frozen=True)
class ParetoTails(IncrementModel):
    """``X = sign * Y - shift`` with ``P(Y > y) = y**(-alpha)``, ``y >= 1``.

    ``sign = +1`` with probability ``weight_right``.  The tail balance is
    ``beta = 2 * weight_right - 1``.  When ``alpha > 1`` the shift is fixed to
    the mean ``beta * alpha / (alpha - 1)`` so that ``E X = 0``.
    """

    alpha: float
    weight_right: float = 0.5
    shift: float | None = None
    kind: str = field(default="pareto", init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise DomainError("Pareto tails need 0 < alpha <= 2")
        if not 0 <= self.weight_right <= 1:
            raise ValueError("weight_right must lie in [0, 1]")
        if not is_admissible(self.alpha, self.beta):
            raise DomainError(f"(alpha, beta) = ({self.alpha}, {self.beta}) is not admissible")
        centre = self.beta * self.alpha / (self.alpha - 1) if self.alpha > 1 else 0.0
        if self.shift is None:
            object.__setattr__(self, "shift", centre)
        elif self.alpha > 1 and abs(self.shift - centre) > 1e-12:
            raise ValueError("for alpha > 1 the shift is fixed by mean centring")

    @property
    def beta(self) -> float:
        return 2.0 * self.weight_right - 1.0

    def sample(self, gen, size) -> np.ndarray:
        y = gen.random(size) ** (-1.0 / self.alpha)
        right = gen.random(size) < self.weight_right
        return np.where(right, y, -y) - self.shift

    def _branch(self, c: float, u):
        # alpha * int (y - c)**2 y**(-alpha-1) over {y >= 1, |y - c| < u}
        a = self.alpha
        lo = np.maximum(1.0, c - u)
        hi = np.maximum(lo, c + u)
        return a * (_power_integral(1 - a, lo, hi) - 2 * c * _power_integral(-a, lo, hi)
                    + c * c * _power_integral(-a - 1, lo, hi))

    def truncated_second_moment(self, u):
        u = np.asarray(u, dtype=float)
        s = self.shift
        # right branch: X = Y - s ; left branch: X = -(Y + s), |X| = |Y - (-s)|
        m = self.weight_right * self._branch(s, u) + (1 - self.weight_right) * self._branch(-s, u)
        out = m / u**2
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        d = {"kind": "pareto", "alpha": self.alpha, "weight_right": self.weight_right}
        if self.alpha <= 1 and self.shift:
            d["shift"] = self.shift
        return d


def truncated_second_moment(model: IncrementModel, u: float):
    """``mu(u) = E[X**2; |X| < u] / u**2``."""
    if np.any(np.asarray(u) <= 0):
        raise ValueError("u must be positive")
    return model.truncated_second_moment(u)


def norming_c(model: IncrementModel, x: float, rtol: float = 1e-9, max_iter: int = 200) -> float:
    """Norming constant ``c(x) = inf{u >= u_min : mu(v) <= 1/x for all v >= u}``."""
    if not x >= 1:
        raise DomainError("norming_c needs x >= 1")
    target = 1.0 / x
    env = model._mu_envelope
    lo = model._u_min
    if lo > 0 and env(lo) <= target:
        return lo
    hi = max(lo, 1.0) * 2
    for _ in range(2000):
        if env(hi) <= target:
            break
        lo, hi = hi, hi * 2
    else:
        raise ValueError("truncated second moment never drops below 1/x (degenerate model)")
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if env(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def sample_increment(model: IncrementModel, rng: "RngStream | np.random.Generator") -> float:
    return float(model.sample(as_generator(rng), 1)[0])


def model_from_dict(spec: dict) -> IncrementModel:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "lattice":
            return Lattice(spec.pop("support"), spec.pop("probs"), **spec)
        if kind == "stable":
            return StableExact(float(spec.pop("alpha")), float(spec.pop("beta", 0.0)),
                               float(spec.pop("scale", 1.0)), **spec)
        if kind == "pareto":
            return ParetoTails(float(spec.pop("alpha")), float(spec.pop("weight_right", 0.5)),
                               spec.pop("shift", None), **spec)
    except TypeError as exc:
        raise ValueError(f"bad model specification: {exc}") from None
    raise ValueError(f"unknown model kind {kind!r}")
