"""Seeded, block-parallel Monte Carlo helpers.

Every estimator splits its sample budget into fixed-size blocks, and each
block gets its own stream spawned from one ``SeedSequence``.  The block
layout depends only on the budget, so results are identical for any
thread count.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

BLOCK = 1 << 15


def thread_count() -> int:
    raw = os.environ.get("CHORDMINK_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    if k <= 0:
        k = os.cpu_count() or 1
    return max(1, k)


@dataclass
class Moments:
    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0

    def add(self, values):
        values = np.asarray(values, dtype=float)
        self.total += float(values.sum())
        self.total_sq += float(np.dot(values, values))
        self.count += values.size
        return self

    def merge(self, other: "Moments"):
        self.total += other.total
        self.total_sq += other.total_sq
        self.count += other.count
        return self

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return float("inf")
        var = (self.total_sq - self.count * self.mean**2) / (self.count - 1)
        return float(np.sqrt(max(var, 0.0) / self.count))


def run_blocks(fn, samples: int, seed, block: int = BLOCK) -> Moments:
    """Apply ``fn(rng, size) -> values`` over blocks and pool the moments in block order."""
    samples = int(samples)
    if samples <= 0:
        raise ValueError("sample count must be positive")
    sizes = [block] * (samples // block)
    if samples % block:
        sizes.append(samples % block)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(sizes))

    def work(k):
        rng = np.random.default_rng(children[k])
        return Moments().add(fn(rng, sizes[k]))

    workers = min(thread_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    out = Moments()
    for part in parts:
        out.merge(part)
    return out


def uniform_sphere(rng, size: int, n: int) -> np.ndarray:
    x = rng.standard_normal((size, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def uniform_ball(rng, size: int, n: int) -> np.ndarray:
    return uniform_sphere(rng, size, n) * rng.random(size)[:, None] ** (1.0 / n)


def derive_seed(seed, *keys) -> np.random.SeedSequence:
    """Independent child stream keyed by integers, e.g. facet index."""
    base = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return np.random.SeedSequence(entropy=base, spawn_key=tuple(int(k) for k in keys))
