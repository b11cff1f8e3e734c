"""Generating-function upper bound ``q_n`` for ``P(T_g > n)`` and the constant ``R(1)``.

``sum_n z**n q_n = exp{sum_n z**n / n * P(S_n >= -g(n))}``.  For
superadditive ``g`` one has ``P(T_g > n) <= q_n``, with equality at ``g = 0``
(the Sparre Andersen identity).  ``R(1) = exp{sum_n P(S_n in [-g(n), 0]) / n}``.

``R(1)`` here bounds ``lim q_n / P(T_0^w > n)`` where ``T_0^w`` is the first
time ``S_n <= 0``; on lattices the atom at 0 makes ``P(T_0^w > n)`` differ
from ``P(T_0 > n)`` by a constant factor (1/2 for the simple walk).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .boundary import Boundary, Kind, additivity_check
from .curves import fmt
from .increments import IncrementModel, Lattice
from .oracle import dp_positivity, dp_survival
from .walk import run_walks


@dataclass
class PositivitySequence:
    """``b[n-1] = P(S_n >= -g(n))`` and ``r[n-1] = P(S_n in [-g(n), 0])`` for ``n = 1..N``."""

    b: list
    r: list
    provenance: str
    b_stderr: np.ndarray | None = None
    r_stderr: np.ndarray | None = None
    base: int | None = None

    def __post_init__(self):
        if len(self.b) != len(self.r):
            raise ValueError("b and r must have equal length")
        if self.provenance not in ("dp-exact", "mc"):
            raise ValueError("provenance must be 'dp-exact' or 'mc'")

    @property
    def is_exact(self) -> bool:
        return bool(self.b) and isinstance(self.b[0], Fraction)

    @property
    def n_max(self) -> int:
        return len(self.b)


def positivity_probs(model: IncrementModel, g: Boundary | None, n_max: int, mode: str = "exact",
                     n_paths: int = 10**5, rng=None, workers: int = 1) -> PositivitySequence:
    """``b`` and ``r`` by dynamic programming (``exact`` / ``float``, lattice only) or Monte Carlo (``mc``)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if mode in ("exact", "float"):
        if not isinstance(model, Lattice):
            raise TypeError("dynamic-programming positivity needs a lattice model")
        b, r = dp_positivity(model, g, n_max, exact=(mode == "exact"))
        return PositivitySequence(b, r, "dp-exact", base=model.denominator)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("Monte Carlo mode needs an rng")
    ns = np.arange(1, n_max + 1)
    gv = np.zeros(n_max) if g is None or g.is_zero else np.asarray(g(ns), dtype=float)
    batch = run_walks(model, n_paths, n_max, [], rng, checkpoints=ns, workers=workers)
    S = batch.states
    inb = S >= -gv[:, None]
    inr = inb & (S <= 0)
    b, r = inb.mean(axis=1), inr.mean(axis=1)
    return PositivitySequence(list(b), list(r), "mc",
                              np.sqrt(b * (1 - b) / n_paths), np.sqrt(r * (1 - r) / n_paths))


def qn_sequence(b, n_max: int | None = None) -> list:
    """Coefficients ``q_0..q_N`` of ``exp{sum b_k z**k / k}``.

    Uses ``n q_n = sum_{k=1}^n b_k q_{n-k}``.  Rational input gives exact
    rational output, computed over integers; float input uses ``math.fsum``.
    """
    base = b.base if isinstance(b, PositivitySequence) else None
    seq = b.b if isinstance(b, PositivitySequence) else list(b)
    n_max = len(seq) if n_max is None else n_max
    if n_max > len(seq):
        raise ValueError("b is shorter than n_max")
    seq = seq[:n_max]
    if seq and all(isinstance(x, (Fraction, int)) for x in seq):
        return _qn_exact([Fraction(x) for x in seq], base)
    q = [1.0]
    for n in range(1, n_max + 1):
        q.append(math.fsum(float(seq[k - 1]) * q[n - k] for k in range(1, n + 1)) / n)
    return q


def _qn_exact(b: list[Fraction], base: int | None = None) -> list[Fraction]:
    n_max = len(b)
    if base is None or any((x * base**k).denominator != 1 for k, x in enumerate(b, start=1)):
        q = [Fraction(1)]
        for n in range(1, n_max + 1):
            q.append(sum((b[k - 1] * q[n - k] for k in range(1, n + 1)), Fraction(0)) / n)
        return q
    # with b_k = B_k / base**k, Q_n = q_n n! base**n is an integer and
    # Q_n = sum_k B_k (n-1)!/(n-k)! Q_{n-k}
    B = [int(x * base**k) for k, x in enumerate(b, start=1)]
    Q = [1]
    fact = [1]
    for n in range(1, n_max + 1):
        fact.append(fact[-1] * n)
        acc = 0
        falling = 1
        for k in range(1, n + 1):
            acc += B[k - 1] * falling * Q[n - k]
            falling *= n - k
        Q.append(acc)
    return [Fraction(Qn, fact[n] * base**n) for n, Qn in enumerate(Q)]


@dataclass(frozen=True)
class R1Estimate:
    """``R(1)`` as a truncation plus a tail allowance.

    ``partial_sum_exp = exp(sum_{n <= N} r_n / n)``; the true value lies in
    ``[partial_sum_exp, partial_sum_exp + tail_bound]`` when the dyadic
    block sums of ``r_n / n`` decay geometrically with ratio ``block_ratio``.
    """

    partial_sum_exp: float
    tail_bound: float
    block_ratio: float | None
    divergent: bool

    @property
    def upper(self) -> float:
        return self.partial_sum_exp + self.tail_bound


def r1_estimate(r, n_max: int | None = None, divergence_ratio: float = 0.95) -> R1Estimate:
    seq = r.r if isinstance(r, PositivitySequence) else list(r)
    n_max = len(seq) if n_max is None else n_max
    x = np.array([float(v) for v in seq[:n_max]])
    terms = x / np.arange(1, n_max + 1)
    partial = math.fsum(terms)
    blocks = []
    j = 0
    while 2 ** (j + 1) - 1 <= n_max:
        blocks.append(math.fsum(terms[2**j - 1:2 ** (j + 1) - 1]))
        j += 1
    if all(v == 0 for v in blocks[-3:]):
        return R1Estimate(math.exp(partial), 0.0, 0.0, False)
    if len(blocks) < 3:
        raise ValueError("need at least three complete dyadic blocks")
    # fitted geometric ratio over the last three blocks
    a, b_, c = blocks[-3:]
    lam = math.sqrt(c / a) if a > 0 else math.inf
    if lam >= divergence_ratio:
        return R1Estimate(math.exp(partial), math.inf, lam, True)
    tail_log = c * lam / (1 - lam)
    return R1Estimate(math.exp(partial), math.exp(partial) * math.expm1(tail_log), lam, False)


@dataclass
class BoundReport:
    precondition_ok: bool
    additivity_worst: float
    n: np.ndarray
    q: list
    p_Tg: list
    p_T0: list
    b: list
    r: list
    r1: R1Estimate | None

    @property
    def holds(self) -> bool:
        return self.precondition_ok and all(qn >= pn for qn, pn in zip(self.q, self.p_Tg))

    @property
    def worst_slack(self) -> float:
        """``min_n (q_n - P(T_g > n))``."""
        return float(min(float(qn - pn) for qn, pn in zip(self.q, self.p_Tg)))

    @property
    def ratio_T0(self) -> np.ndarray:
        return np.array([float(q) / float(p) for q, p in zip(self.q, self.p_T0)])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "b", "r", "q", "p_Tg", "p_T0"])
        bb = [1.0] + [float(v) for v in self.b]
        rr = [0.0] + [float(v) for v in self.r]
        for i, n in enumerate(self.n):
            w.writerow([fmt(n), fmt(bb[i]), fmt(rr[i]), fmt(float(self.q[i])),
                        fmt(float(self.p_Tg[i])), fmt(float(self.p_T0[i]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def bound_check(model: Lattice, g: Boundary | None, n_max: int, exact: bool = True) -> BoundReport:
    """Compare ``q_n`` with the exact ``P(T_g > n)`` for ``n <= n_max``.

    Requires superadditive ``g``; otherwise a report with
    ``precondition_ok = False`` and no comparison is returned.
    """
    grid = np.arange(0, n_max + 1)
    gf = (lambda t: np.zeros(np.shape(t))) if g is None else g
    add = additivity_check(gf, grid, "super", tol=1e-9)
    if not add.passed:
        return BoundReport(False, add.worst_violation, grid, [], [], [], [], [], None)
    seq = positivity_probs(model, g, n_max, "exact" if exact else "float")
    q = qn_sequence(seq)
    cg = dp_survival(model, g, Kind.LOWER, n_max, exact=exact)
    c0 = dp_survival(model, None, Kind.ZERO, n_max, exact=exact)
    p_g = list(cg.exact) if exact else list(cg.prob)
    p_0 = list(c0.exact) if exact else list(c0.prob)
    try:
        r1 = r1_estimate(seq)
    except ValueError:
        r1 = None
    return BoundReport(True, add.worst_violation, grid, q, p_g, p_0, seq.b, seq.r, r1)
