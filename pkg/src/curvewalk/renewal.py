"""Renewal-function tables and an evaluable renewal function ``h``.

``h`` is the renewal function of the strict descending ladder heights,
``h(0) = 1``, extended by zero to the negative half line.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .curves import fmt


class ExtrapolationError(ValueError):
    pass


@dataclass
class RenewalTable:
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_paths: int
    censored: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.grid.size == 0 or self.grid[0] != 0:
            raise ValueError("renewal grid must start at 0")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("renewal grid must be increasing")

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def subadditivity_violation(self, k: float = 3.0) -> float:
        """Largest ``h(x+y) - h(x) - h(y) - k*se`` over grid triples with ``x+y`` on the grid."""
        pos = {float(x): i for i, x in enumerate(self.grid)}
        worst = -math.inf
        for i, x in enumerate(self.grid):
            for j in range(i, self.grid.size):
                s = float(x + self.grid[j])
                if s in pos:
                    l = pos[s]
                    se = math.sqrt(self.stderr[i] ** 2 + self.stderr[j] ** 2 + self.stderr[l] ** 2)
                    worst = max(worst, self.values[l] - self.values[i] - self.values[j] - k * se)
        return worst

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value", "stderr", "n_paths"])
        for x, v, s in zip(self.grid, self.values, self.stderr):
            w.writerow([fmt(x), fmt(v), fmt(s), self.n_paths])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "RenewalTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["x"]) for r in rows], [float(r["value"]) for r in rows],
                   [float(r["stderr"]) for r in rows], int(rows[0]["n_paths"]))


class RenewalFunction:
    """Evaluable ``h`` built from values on a grid.

    Parameters
    ----------
    grid, values
        Knots, ``grid[0] == 0`` and ``values[0] == 1``.
    index
        Regular-variation index ``alpha (1 - rho)`` used beyond the last knot,
        ``h(y) = h(x_last) (y / x_last)**index``.
    step
        Right-continuous step interpolation (exact for lattice ladder heights
        on an integer grid); otherwise linear.
    max_decades
        Refuse evaluation further than this many decades beyond the last knot.
    """

    def __init__(self, grid, values, index: float = 1.0, step: bool = True, max_decades: float = 1.0):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.grid[0] != 0 or self.values[0] != 1:
            raise ValueError("h must start at h(0) = 1")
        self.index = float(index)
        self.step = step
        self.max_decades = max_decades
        self.extended_evaluations = 0

    @classmethod
    def from_table(cls, table: RenewalTable, index: float, **kw) -> "RenewalFunction":
        return cls(table.grid, table.values, index, step=kw.pop("step", False), **kw)

    @classmethod
    def from_integers(cls, values, index: float = 1.0, **kw) -> "RenewalFunction":
        """Exact lattice ``h`` on ``0..len(values)-1``."""
        return cls(np.arange(len(values)), values, index, step=True, **kw)

    @property
    def x_last(self) -> float:
        return float(self.grid[-1])

    def _tail(self, y: np.ndarray) -> np.ndarray:
        if np.any(y > self.x_last * 10**self.max_decades):
            raise ExtrapolationError(
                f"h requested at {float(y.max())}, beyond {self.max_decades} decade(s) of the table end {self.x_last}")
        self.extended_evaluations += int(y.size)
        return self.values[-1] * (y / self.x_last) ** self.index

    def _eval(self, y, step: bool):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        pos = y >= 0
        inside = pos & (y <= self.x_last)
        if step:
            i = np.searchsorted(self.grid, y[inside], side="right") - 1
            out[inside] = self.values[i]
        else:
            out[inside] = np.interp(y[inside], self.grid, self.values)
        far = y > self.x_last
        if np.any(far):
            out[far] = self._tail(y[far])
        return float(out) if out.ndim == 0 else out

    def __call__(self, y):
        return self._eval(y, self.step)

    def smooth(self, y):
        """Linearly interpolated version, for quadrature."""
        return self._eval(y, False)
