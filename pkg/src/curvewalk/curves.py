"""Survival curves ``n -> P(T > n)`` and ratios between them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

PROVENANCES = ("dp-exact", "mc", "importance")


def fmt(x) -> str:
    """Shortest round-trip decimal text for CSV output."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class SurvivalCurve:
    """Probabilities ``P(T > n)`` on an increasing grid.

    ``exact`` holds rational values when the curve comes from the rational
    dynamic program.  ``stream`` records the random-stream identity of Monte
    Carlo curves so that ratios between curves can tell whether they were
    computed on common paths.
    """

    n: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    provenance: str
    n_paths: int | None = None
    stream: tuple | None = None
    exact: tuple[Fraction, ...] | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        self.prob = np.asarray(self.prob, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        if not (self.n.shape == self.prob.shape == self.stderr.shape):
            raise ValueError("n, prob and stderr must have equal length")
        if np.any(np.diff(self.n) <= 0):
            raise ValueError("curve grid must be strictly increasing")

    def at(self, n: int) -> float:
        i = np.searchsorted(self.n, n)
        if i >= self.n.size or self.n[i] != n:
            raise KeyError(f"n={n} not on the curve grid")
        return float(self.prob[i])

    def exact_at(self, n: int) -> Fraction:
        if self.exact is None:
            raise ValueError("curve has no exact values")
        return self.exact[int(np.searchsorted(self.n, n))]

    def restrict(self, n_grid: Sequence[int]) -> "SurvivalCurve":
        pos = np.searchsorted(self.n, n_grid)
        if np.any(pos >= self.n.size) or np.any(self.n[np.minimum(pos, self.n.size - 1)] != n_grid):
            raise KeyError("requested grid is not a subset of the curve grid")
        ex = tuple(self.exact[i] for i in pos) if self.exact is not None else None
        return SurvivalCurve(self.n[pos], self.prob[pos], self.stderr[pos], self.provenance,
                             self.n_paths, self.stream, ex, self.label)

    @property
    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.prob) <= 0))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "prob", "stderr", "provenance"])
        for n, p, s in zip(self.n, self.prob, self.stderr):
            w.writerow([fmt(n), fmt(p), fmt(s), self.provenance])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "SurvivalCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty curve")
        prov = {r["provenance"] for r in rows}
        if len(prov) != 1:
            raise ValueError(f"{path}: mixed provenance")
        return cls([int(r["n"]) for r in rows], [float(r["prob"]) for r in rows],
                   [float(r["stderr"]) for r in rows], prov.pop())


@dataclass
class RatioTable:
    """Pointwise ratio of two survival curves with a propagated standard error.

    ``method`` names the error formula: ``exact`` (both curves exact),
    ``coupled-nested`` (common paths, nested survival events) or
    ``independent``.
    """

    n: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    method: str

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "ratio", "stderr", "method"])
        for n, r, s in zip(self.n, self.ratio, self.stderr):
            w.writerow([fmt(n), fmt(r), fmt(s), self.method])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def last_doubling_change(self) -> float:
        """Relative change of the ratio between the last two dyadic grid points."""
        dy = [i for i, n in enumerate(self.n) if n > 0 and n & (n - 1) == 0]
        if len(dy) < 2:
            raise ValueError("need at least two dyadic grid points")
        a, b = self.ratio[dy[-2]], self.ratio[dy[-1]]
        return float(abs(b - a) / abs(a))


def ratio_curve(numerator: SurvivalCurve, denominator: SurvivalCurve,
                coupled: bool | None = None) -> RatioTable:
    """``numerator / denominator`` on their common grid.

    When ``coupled`` is None it is inferred from the curves: two Monte Carlo
    curves with the same stream identity and path count are treated as
    computed on common paths.  The coupled formula assumes nested survival
    events (one crossing time dominates the other pathwise), which holds for
    the boundary comparisons in this package.
    """
    if numerator.n.shape != denominator.n.shape or np.any(numerator.n != denominator.n):
        raise ValueError("curves are on different grids")
    if np.any(denominator.prob <= 0):
        raise ValueError("denominator vanishes on the grid")
    a, b = numerator.prob, denominator.prob
    r = a / b
    exact_both = numerator.provenance == "dp-exact" and denominator.provenance == "dp-exact"
    if exact_both:
        return RatioTable(numerator.n.copy(), r, np.zeros_like(r), "exact")
    if coupled is None:
        coupled = (numerator.stream is not None and numerator.stream == denominator.stream
                   and numerator.n_paths == denominator.n_paths
                   and numerator.provenance == denominator.provenance == "mc")
    if coupled:
        N = float(numerator.n_paths)
        # delta method with P(A and B) = min(a, b) reduces to a |a - b| / b**3
        se = np.sqrt(a * np.abs(a - b) / (N * b**3))
        return RatioTable(numerator.n.copy(), r, se, "coupled-nested")
    se = np.abs(r) * np.sqrt(_rel(numerator) ** 2 + _rel(denominator) ** 2)
    return RatioTable(numerator.n.copy(), r, se, "independent")


def _rel(c: SurvivalCurve) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(c.prob > 0, c.stderr / c.prob, math.inf)
    return out
