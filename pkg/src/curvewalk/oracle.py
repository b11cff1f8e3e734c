"""Exact dynamic programming for lattice walks.

Mass is pushed forward one step at a time over a dense window of integer
positions, and positions below the absorbing level are dropped immediately.
Two arithmetic backends:

* ``exact=True``: integer numerators over ``D**n`` where ``D`` is the common
  denominator of the step probabilities.  Results are returned as
  :class:`fractions.Fraction`.
* ``exact=False``: float64 with numpy's pairwise summation for totals.

The ladder-height law of a centred bounded lattice walk is obtained from the
Wiener-Hopf root factorisation of ``1 - E z**X`` rather than by running an
absorbing walk until the leftover mass is below ``tol``: the descending
ladder epoch has tail of order ``n**-1/2``, so absorption to ``1e-10`` would
need around ``1e20`` steps.  :func:`absorbed_ladder_heights` keeps the
absorbing computation as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import signal

from .boundary import Boundary, Kind, lower_level
from .curves import SurvivalCurve
from .increments import DomainError, Lattice
from .renewal import RenewalFunction


@dataclass
class DpState:
    """Surviving mass at time ``n`` on positions ``lo, lo+1, ...``.

    In exact mode ``mass`` holds integer numerators over ``scale``.
    """

    n: int
    lo: int
    mass: np.ndarray
    scale: int = 1

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.lo, self.lo + self.mass.size)

    def total(self):
        if self.mass.dtype == object:
            return Fraction(int(sum(self.mass)), self.scale)
        return float(self.mass.sum())

    def as_map(self) -> dict:
        if self.mass.dtype == object:
            return {int(x): Fraction(int(m), self.scale) for x, m in zip(self.positions, self.mass) if m}
        return {int(x): float(m) for x, m in zip(self.positions, self.mass) if m}


def _require_lattice(model) -> Lattice:
    if not isinstance(model, Lattice):
        raise TypeError("the dynamic-programming oracle needs a Lattice model")
    return model


def _weights(model: Lattice, exact: bool):
    if exact:
        D = model.denominator
        return [int(p * D) for p in model.probs], D
    return list(model.float_probs), 1


def _step(mass: np.ndarray, model: Lattice, w) -> np.ndarray:
    """One free step; the result starts at position ``lo + min(support)``."""
    smin, smax = model.support[0], model.support[-1]
    L = mass.size
    new = np.zeros(L + smax - smin, dtype=mass.dtype)
    for s, ws in zip(model.support, w):
        off = s - smin
        new[off:off + L] += ws * mass
    return new


def propagate(model: Lattice, n_max: int, level: Callable | None = None, exact: bool = False,
              start: int = 0) -> Iterator[DpState]:
    """Yield the surviving mass at times ``0, 1, ..., n_max``.

    ``level(t)`` is the absorbing level: mass at ``x`` with ``x < level(t)``
    is removed at time ``t >= 1``.  ``level=None`` gives the free walk.
    """
    model = _require_lattice(model)
    w, D = _weights(model, exact)
    mass = np.array([1 if exact else 1.0], dtype=object if exact else float)
    lo = int(start)
    scale = 1
    yield DpState(0, lo, mass, scale)
    for n in range(1, n_max + 1):
        mass = _step(mass, model, w)
        lo += model.support[0]
        scale *= D
        if level is not None:
            b = float(level(np.array([n]))[0])
            cut = math.ceil(b) - lo
            if cut > 0:
                mass = mass[cut:]
                lo += cut
        if exact:
            # trim exact zeros at both ends to keep the window tight
            nz = np.flatnonzero(mass != 0)
            if nz.size:
                mass = mass[nz[0]:nz[-1] + 1]
                lo += int(nz[0])
        yield DpState(n, lo, mass, scale)


def _level_for(g: Boundary | None, kind) -> Callable | None:
    kind = Kind(kind)
    if kind is Kind.ZERO:
        g = None
    return lower_level(g, kind)


def dp_survival(model: Lattice, g: Boundary | None = None, kind=Kind.LOWER, n_max: int = 100,
                exact: bool = False, n_grid: Sequence[int] | None = None, start: int = 0) -> SurvivalCurve:
    """Exact ``P(T > n)`` for ``n = 0..n_max`` (or on ``n_grid``).

    ``kind`` selects ``T_g`` (``lower``), ``T^_g`` (``shrinking``) or ``T_0``
    (``zero``, ``g`` ignored).  ``g=None`` means ``g = 0``.
    """
    level = _level_for(g, kind)
    want = set(range(n_max + 1)) if n_grid is None else {int(n) for n in n_grid}
    if n_grid is not None:
        n_max = max(want)
    ns, vals = [], []
    for st in propagate(model, n_max, level, exact, start):
        if st.n in want:
            ns.append(st.n)
            vals.append(st.total())
    prob = np.array([float(v) for v in vals])
    return SurvivalCurve(ns, prob, np.zeros(len(ns)), "dp-exact",
                         exact=tuple(vals) if exact else None)


def dp_marginal(model: Lattice, n: int, g: Boundary | None = None, kind=None,
                exact: bool = True, start: int = 0) -> dict:
    """Law of ``S_n`` as a position -> mass map, optionally restricted to ``{T > n}``.

    ``kind=None`` means unconstrained; otherwise the survival event for the
    given boundary kind is imposed.
    """
    level = None if kind is None else _level_for(g, kind)
    st = None
    for st in propagate(model, n, level, exact, start):
        pass
    return st.as_map()


def dp_positivity(model: Lattice, g: Boundary | None, n_max: int, exact: bool = True):
    """``b_n = P(S_n >= -g(n))`` and ``r_n = P(-g(n) <= S_n <= 0)`` for ``n = 1..n_max``."""
    b, r = [], []
    for st in propagate(model, n_max, None, exact, 0):
        if st.n == 0:
            continue
        gn = 0.0 if g is None or g.is_zero else float(g(st.n))
        x = st.positions
        inb = x >= -gn
        inr = inb & (x <= 0)
        if exact:
            b.append(Fraction(int(sum(st.mass[inb])), st.scale))
            r.append(Fraction(int(sum(st.mass[inr])), st.scale))
        else:
            b.append(float(st.mass[inb].sum()))
            r.append(float(st.mass[inr].sum()))
    return b, r


def dp_expectation(model: Lattice, f: Callable[[np.ndarray, int], np.ndarray], n_grid: Sequence[int],
                   g: Boundary | None = None, kind=Kind.LOWER, start: int = 0) -> np.ndarray:
    """``E[f(S_n, n); T > n]`` on ``n_grid`` (floating point)."""
    level = _level_for(g, kind)
    want = {int(n) for n in n_grid}
    out = {}
    for st in propagate(model, max(want), level, False, start):
        if st.n in want:
            nz = st.mass != 0
            x = st.positions[nz].astype(float)
            out[st.n] = float(np.dot(st.mass[nz], np.asarray(f(x, st.n), dtype=float))) if x.size else 0.0
    return np.array([out[int(n)] for n in n_grid])


# ---------------------------------------------------------------------------
# ladder heights and the renewal function


@dataclass(frozen=True)
class LadderHeightPmf:
    """Law of the strict descending ladder height on ``1..len(probs)``."""

    probs: np.ndarray
    residual: float
    method: str

    @property
    def heights(self) -> np.ndarray:
        return np.arange(1, self.probs.size + 1)

    def as_dict(self) -> dict:
        return {int(k): float(p) for k, p in zip(self.heights, self.probs) if p > 0}

    @property
    def mean(self) -> float:
        return float(np.dot(self.heights, self.probs))


def _poly_fraction_divmod(num: list[Fraction], den: list[Fraction]):
    # coefficients highest degree first
    num = list(num)
    q = []
    while len(num) >= len(den):
        c = num[0] / den[0]
        q.append(c)
        for i, d in enumerate(den):
            num[i] -= c * d
        num.pop(0)
    return q, num


def exact_ladder_height_pmf(model: Lattice, tol: float = 1e-10) -> LadderHeightPmf:
    """Ladder-height pmf of a centred lattice walk by Wiener-Hopf root factorisation.

    With ``D`` the largest downward step and ``phi(z) = E z**X``, the
    polynomial ``z**D (1 - phi(z))`` has a double root at 1; after removing
    it, the ``D - 1`` roots inside the unit disc ``r_i`` give
    ``z**D - sum_k p_k z**(D-k) = (z - 1) prod (z - r_i)`` with ``p_k`` the
    ladder-height probabilities.  ``residual`` is ``|1 - sum p_k|`` plus the
    total size of clipped negative or imaginary rounding parts.
    """
    model = _require_lattice(model)
    if not model.is_centered:
        raise DomainError("ladder heights of a drifting walk are defective; mass does not decay")
    span = model.span
    sup = [s // span for s in model.support]
    D = -sup[0]
    U = sup[-1]
    # z**D (1 - phi(z)), degree D + U, highest first
    coef = [Fraction(0)] * (D + U + 1)
    coef[U] += 1  # z**D term sits at index (D+U) - D
    for s, p in zip(sup, model.probs):
        coef[(D + U) - (s + D)] -= p
    q, rem = _poly_fraction_divmod(coef, [Fraction(1), Fraction(-2), Fraction(1)])
    if any(rem):
        raise DomainError("1 - phi(z) lacks the double root at 1 expected for a centred walk")
    roots = np.roots([float(c) for c in q]) if len(q) > 1 else np.zeros(0)
    inner = roots[np.abs(roots) < 1 - 1e-12]
    if inner.size != D - 1:
        raise DomainError(f"expected {D - 1} roots inside the unit disc, found {inner.size}")
    Q = np.poly(np.concatenate([[1.0], inner]))
    leak = float(np.abs(Q.imag).sum()) if np.iscomplexobj(Q) else 0.0
    p = -np.real(Q[1:])
    leak += float(-p[p < 0].sum())
    p = np.clip(p, 0.0, None)
    probs = np.zeros(D * span)
    probs[span - 1::span] = p
    residual = abs(1.0 - float(probs.sum())) + leak
    if residual > tol:
        raise DomainError(f"ladder-height pmf residual {residual:.3g} exceeds tol {tol:.3g}")
    return LadderHeightPmf(probs, residual, "wiener-hopf-roots")


def absorbed_ladder_heights(model: Lattice, n_steps: int, exact: bool = False):
    """Ladder heights collected by absorbing the walk below 0 for ``n_steps`` steps.

    Returns ``(pmf, unabsorbed)`` where ``pmf[k-1] = P(chi = k, T_0 <= n_steps)``
    and ``unabsorbed = P(T_0 > n_steps)``.  Works for drifting walks as well.
    """
    model = _require_lattice(model)
    w, D = _weights(model, exact)
    depth = -model.support[0]
    acc = [0] * depth if exact else np.zeros(depth)
    mass = np.array([1 if exact else 1.0], dtype=object if exact else float)
    lo, scale = 0, 1
    for _ in range(n_steps):
        mass = _step(mass, model, w)
        lo += model.support[0]
        scale *= D
        cut = min(max(0, -lo), mass.size)
        for i in range(cut):
            # position lo + i < 0 is an overshoot of size -(lo + i)
            k = -(lo + i) - 1
            acc[k] += Fraction(int(mass[i]), scale) if exact else mass[i]
        mass = mass[cut:]
        lo += cut
    if exact:
        return tuple(Fraction(a) for a in acc), Fraction(int(sum(mass)), scale)
    return np.asarray(acc, dtype=float), float(mass.sum())


@dataclass(frozen=True)
class ExactRenewal:
    """``h`` on ``0..x_max`` with a per-point error width from the pmf residual."""

    values: np.ndarray
    width: np.ndarray

    def function(self, index: float = 1.0, **kw) -> RenewalFunction:
        return RenewalFunction.from_integers(self.values, index, **kw)

    def __call__(self, x):
        x = np.asarray(x)
        xi = np.floor(x).astype(np.int64)
        if np.any(xi >= self.values.size):
            raise ValueError("h requested beyond the computed range")
        out = np.where(xi >= 0, self.values[np.clip(xi, 0, None)], 0.0)
        return float(out) if out.ndim == 0 else out


def exact_renewal_h(pmf: LadderHeightPmf, x_max: int) -> ExactRenewal:
    """``h(x) = sum_m P(chi_1 + ... + chi_m <= x)`` via the renewal recursion."""
    if pmf.residual > 1e-10:
        raise ValueError("ladder-height pmf residual exceeds 1e-10")
    # u(x) = sum_k p_k u(x - k), u(0) = 1: an all-pole filter driven by a unit impulse
    impulse = np.zeros(x_max + 1)
    impulse[0] = 1.0
    u = signal.lfilter([1.0], np.concatenate([[1.0], -pmf.probs]), impulse)
    h = np.cumsum(u)
    width = pmf.residual * (np.arange(x_max + 1) + 1) * h
    return ExactRenewal(h, width)


def lattice_renewal(model: Lattice, x_max: int) -> ExactRenewal:
    return exact_renewal_h(exact_ladder_height_pmf(model), x_max)


def dp_conditioned_survival(model: Lattice, g: Boundary | None, N_grid: Sequence[int],
                            start: int = 0, h: ExactRenewal | None = None) -> np.ndarray:
    """Exact ``P^h_start(T^_g > N)`` for the walk conditioned to stay nonnegative.

    Uses ``P^h(A) = E[h(S_N) / h(start); A, T_0 > N]``; with ``g >= 0`` the
    event ``{T^_g > N}`` already implies ``T_0 > N``.
    """
    N_max = int(max(N_grid))
    if h is None:
        h = lattice_renewal(model, start + N_max * model.support[-1] + 1)
    h0 = float(h(start))
    vals = dp_expectation(model, lambda x, n: h(np.maximum(x, 0)) * (x >= 0), N_grid,
                          g if g is not None else None, Kind.SHRINKING, start)
    return vals / h0
