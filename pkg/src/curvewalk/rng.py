"""Seeded random streams, mergeable Monte Carlo summaries and chunked fan-out.

Every estimator in the package splits its paths into fixed-size chunks and
draws chunk ``k`` from ``stream.child(k)``.  Chunk assignment depends only on
the path count, never on the number of workers, so results are identical for
any ``workers`` value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK_PATHS = 8192
_SEED_LIMIT = 2**64


class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``.

    The stream owns a PCG64 generator seeded from
    ``SeedSequence(master_seed, spawn_key=(stream_id, *keys))``.  Two streams
    with the same identity produce bit-identical sequences; streams that
    differ in ``stream_id`` or ``keys`` are statistically independent.
    """

    def __init__(self, master_seed: int, stream_id: int = 0, keys: Sequence[int] = ()):
        for v in (master_seed, stream_id, *keys):
            if not 0 <= int(v) < _SEED_LIMIT:
                raise ValueError(f"stream identifiers must be 64-bit unsigned, got {v}")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.keys = tuple(int(k) for k in keys)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *self.keys))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.keys + tuple(keys))

    @property
    def identity(self) -> tuple[int, ...]:
        return (self.master_seed, self.stream_id, *self.keys)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, keys={self.keys})"


def as_generator(rng: "RngStream | np.random.Generator | int") -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RngStream(int(rng)).generator


def as_stream(rng: "RngStream | int") -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError("estimators need an RngStream (or an integer seed) to split into chunks")


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error.

    Stores ``(n, mean, m2)`` where ``m2`` is the sum of squared deviations, so
    that :meth:`merge` is associative (Chan et al. pairwise update).
    """

    n: int
    mean: float
    m2: float = 0.0
    seed: int | None = None

    @classmethod
    def from_samples(cls, samples, seed: int | None = None) -> "Estimate":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            return cls(0, 0.0, 0.0, seed)
        mean = float(x.mean())
        return cls(int(x.size), mean, float(((x - mean) ** 2).sum()), seed)

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        # n = 0 marks a value that carries no sampling error
        return cls(0, float(value), 0.0)

    @property
    def value(self) -> float:
        return self.mean

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.n - 1) / self.n)

    def merge(self, other: "Estimate") -> "Estimate":
        if other.n == 0:
            return self
        if self.n == 0:
            return Estimate(other.n, other.mean, other.m2, self.seed if self.seed is not None else other.seed)
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Estimate(n, mean, m2, self.seed if self.seed is not None else other.seed)

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr + slack

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_paths": self.n, "seed": self.seed}


def merge_all(parts: Iterable[Estimate]) -> Estimate:
    out = Estimate(0, 0.0, 0.0)
    for p in parts:
        out = out.merge(p)
    return out


def chunk_sizes(n_paths: int, chunk: int = CHUNK_PATHS) -> list[int]:
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    full, rest = divmod(int(n_paths), chunk)
    return [chunk] * full + ([rest] if rest else [])


def fan_out(fn: Callable[..., T], tasks: Sequence[tuple], workers: int = 1) -> list[T]:
    """Apply ``fn(*task)`` to every task, preserving task order in the result."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))


def chunked(rng: "RngStream | int", n_paths: int, fn: Callable[[RngStream, int], T],
            workers: int = 1, chunk: int = CHUNK_PATHS) -> list[T]:
    """Run ``fn(child_stream, size)`` over the fixed chunk decomposition of ``n_paths``."""
    stream = as_stream(rng)
    tasks = [(stream.child(k), size) for k, size in enumerate(chunk_sizes(n_paths, chunk))]
    return fan_out(fn, tasks, workers)
