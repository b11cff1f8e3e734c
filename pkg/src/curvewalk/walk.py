"""Vectorised random-walk engine with several absorbing levels at once.

A batch of paths is advanced in blocks of steps.  Each path carries a list of
levels ``b_j(t)``; level ``j`` is crossed at the first ``t >= 1`` with
``S_t < b_j(t)``.  A path keeps moving while at least one of its levels is
uncrossed, so every level sees the same increments (coupled estimates).
Finished paths are compacted out of the working arrays.

Increments for a chunk come from that chunk's own stream.  The draws a path
receives depend on which paths are still active, so two calls are pathwise
identical only when they share the model, the levels and the stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .increments import IncrementModel
from .rng import CHUNK_PATHS, RngStream, as_generator, as_stream, chunked

Level = Callable[[np.ndarray], np.ndarray]

_BLOCK_BUDGET = 1 << 16
_ENDPOINT_BLOCK = 1 << 15


@dataclass
class WalkBatch:
    """Outcome of :func:`simulate_walks`.

    ``exit_times[j, i]`` is the crossing time of level ``j`` by path ``i``
    (``horizon + 1`` when not crossed by the horizon) and ``exit_values`` the
    walk position at that time (NaN when censored).  ``states[k, i]`` is
    ``S`` at ``checkpoints[k]`` or NaN if the path had already stopped.
    Ladder records are the strict descending ladder points ``(path, epoch,
    position)`` observed while the path was running, in path-then-time order.
    """

    horizon: int
    exit_times: np.ndarray
    exit_values: np.ndarray
    checkpoints: np.ndarray
    states: np.ndarray
    ladder_path: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ladder_epoch: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ladder_value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stream: tuple | None = None

    @property
    def n_paths(self) -> int:
        return self.exit_times.shape[1]

    def survival(self, j: int, n_grid) -> np.ndarray:
        """Indicator matrix ``1{T_j > n}`` with shape (len(n_grid), n_paths)."""
        n = np.asarray(n_grid, dtype=np.int64)
        return self.exit_times[j][None, :] > n[:, None]

    def ladders_of(self, path: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = np.searchsorted(self.ladder_path, [path, path + 1])
        return self.ladder_epoch[lo:hi], self.ladder_value[lo:hi]

    @staticmethod
    def concat(parts: Sequence["WalkBatch"]) -> "WalkBatch":
        offsets = np.cumsum([0] + [p.n_paths for p in parts[:-1]])
        return WalkBatch(
            horizon=parts[0].horizon,
            exit_times=np.concatenate([p.exit_times for p in parts], axis=1),
            exit_values=np.concatenate([p.exit_values for p in parts], axis=1),
            checkpoints=parts[0].checkpoints,
            states=np.concatenate([p.states for p in parts], axis=1),
            ladder_path=np.concatenate([p.ladder_path + o for p, o in zip(parts, offsets)]),
            ladder_epoch=np.concatenate([p.ladder_epoch for p in parts]),
            ladder_value=np.concatenate([p.ladder_value for p in parts]),
            stream=parts[0].stream,
        )


def simulate_walks(model: IncrementModel, n_paths: int, horizon: int, levels: Sequence[Level],
                   rng, checkpoints: Sequence[int] = (), track_ladders: bool = False,
                   start: float = 0.0) -> WalkBatch:
    """Run ``n_paths`` walks from ``start`` against the given levels.

    Each level maps an integer time array to the absorbing level at those
    times.  Without levels the walks simply run to ``horizon``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    gen = as_generator(rng)
    n_lev = len(levels)
    ckpt = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if ckpt.size and (ckpt[0] < 0 or ckpt[-1] > horizon):
        raise ValueError("checkpoints must lie in [0, horizon]")

    exit_t = np.full((n_lev, n_paths), horizon + 1, dtype=np.int64)
    exit_v = np.full((n_lev, n_paths), np.nan)
    states = np.full((ckpt.size, n_paths), np.nan)
    if ckpt.size and ckpt[0] == 0:
        states[0] = start
    lad_p, lad_t, lad_v = [], [], []

    idx = np.arange(n_paths)
    S = np.full(n_paths, float(start))
    run_min = np.full(n_paths, float(start))
    open_ = np.ones((n_lev, n_paths), dtype=bool)
    t = 0
    while idx.size and t < horizon:
        m = idx.size
        B = int(min(max(_BLOCK_BUDGET // m, 16), horizon - t, _BLOCK_BUDGET))
        P = model.sample(gen, (m, B))
        np.cumsum(P, axis=1, out=P)
        P += S[:, None]
        times = np.arange(t + 1, t + B + 1)

        for j, lev in enumerate(levels):
            rows = np.flatnonzero(open_[j])
            if rows.size == 0:
                continue
            below = P[rows] < np.asarray(lev(times), dtype=float)[None, :]
            hit = below.any(axis=1)
            r = rows[hit]
            k = below[hit].argmax(axis=1)
            exit_t[j, idx[r]] = times[k]
            exit_v[j, idx[r]] = P[r, k]
            open_[j, r] = False

        if ckpt.size:
            sel = (ckpt > t) & (ckpt <= t + B)
            for c in np.flatnonzero(sel):
                states[c, idx] = P[:, ckpt[c] - t - 1]

        if track_ladders:
            prev = np.minimum.accumulate(P, axis=1)
            prev = np.concatenate([run_min[:, None], np.minimum(prev[:, :-1], run_min[:, None])], axis=1)
            r, k = np.nonzero(P < prev)
            lad_p.append(idx[r])
            lad_t.append(times[k])
            lad_v.append(P[r, k])
            run_min = np.minimum(run_min, P.min(axis=1))

        S = P[:, -1].copy()
        t += B
        keep = open_.any(axis=0) if n_lev else np.ones(m, dtype=bool)
        if not keep.all():
            idx, S, run_min, open_ = idx[keep], S[keep], run_min[keep], open_[:, keep]

    if track_ladders and lad_p:
        p = np.concatenate(lad_p)
        e = np.concatenate(lad_t)
        v = np.concatenate(lad_v)
        order = np.lexsort((e, p))
        lad = (p[order], e[order], v[order])
    else:
        lad = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
    stream = rng.identity if isinstance(rng, RngStream) else None
    return WalkBatch(horizon, exit_t, exit_v, ckpt, states, *lad, stream=stream)


def run_walks(model: IncrementModel, n_paths: int, horizon: int, levels: Sequence[Level], rng,
              checkpoints: Sequence[int] = (), track_ladders: bool = False, start: float = 0.0,
              workers: int = 1, chunk: int = CHUNK_PATHS) -> WalkBatch:
    """Chunked, optionally threaded :func:`simulate_walks`; result independent of ``workers``."""

    def one(stream: RngStream, size: int) -> WalkBatch:
        return simulate_walks(model, size, horizon, levels, stream, checkpoints, track_ladders, start)

    parts = chunked(rng, n_paths, one, workers, chunk)
    out = WalkBatch.concat(parts)
    out.stream = as_stream(rng).identity
    return out


def endpoint_sums(model: IncrementModel, n: int, size: int, gen: np.random.Generator) -> np.ndarray:
    """``S_n`` for ``size`` independent walks, without any path bookkeeping."""
    S = np.zeros(size)
    done = 0
    # small blocks keep the draws cache resident
    B = max(1, min(n, _ENDPOINT_BLOCK // max(size, 1)))
    while done < n:
        b = min(B, n - done)
        S += model.sample(gen, (size, b)).sum(axis=1)
        done += b
    return S
