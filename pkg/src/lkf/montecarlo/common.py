"""Shared Monte Carlo plumbing: configs, results, RNG streams, block map-reduce."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from ..errors import InputError, LKFError


class CensoringError(LKFError):
    """Paths hit the time cap in a run where censoring would bias the estimate."""


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    seed: int = 20240601
    euler_dt: float = 1e-4
    time_cap: float = 1e4
    block_size: int = 32768

    def __post_init__(self):
        if self.n_paths < 1:
            raise InputError("n_paths must be >= 1")
        if not self.euler_dt > 0:
            raise InputError("euler_dt must be positive")
        if not self.time_cap > 0:
            raise InputError("time_cap must be positive")
        if self.block_size < 1:
            raise InputError("block_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    n_paths: int
    analytic: Optional[float] = None
    z_score: Optional[float] = None
    censored: int = 0

    @classmethod
    def from_samples(cls, samples: np.ndarray, censored: int = 0) -> "MCResult":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        mean = math.fsum(samples) / n
        se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, n, censored=censored)

    def against(self, analytic: float) -> "MCResult":
        """Attach the value the estimate targets and the resulting z-score."""
        diff = self.estimate - analytic
        if self.std_error > 0:
            z = diff / self.std_error
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return replace(self, analytic=float(analytic), z_score=float(z))


@dataclass
class PathState:
    """Per-path state of one simulated block (arrays of equal length)."""

    t: np.ndarray
    x: np.ndarray
    A: np.ndarray
    local_counts: np.ndarray = field(default=None)

    @classmethod
    def start(cls, n: int, x0: float, n_atoms: int = 0) -> "PathState":
        return cls(np.zeros(n), np.full(n, float(x0)), np.zeros(n), np.zeros((n, n_atoms), dtype=np.int64))


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent counter-based stream for path block ``block``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def worker_count() -> int:
    env = os.environ.get("LKF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"LKF_THREADS must be an integer, got {env!r}")
    return max(1, os.cpu_count() or 1)


def run_blocks(mc: MCConfig, fn: Callable[[np.random.Generator, int], dict]) -> List[dict]:
    """Run ``fn(rng, n)`` over path blocks; results come back in block order."""
    sizes = []
    left = mc.n_paths
    while left > 0:
        sizes.append(min(mc.block_size, left))
        left -= sizes[-1]
    jobs = [(block_rng(mc.seed, i), n) for i, n in enumerate(sizes)]
    workers = min(worker_count(), len(jobs))
    if workers == 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def gather(results: List[dict], key: str) -> np.ndarray:
    return np.concatenate([r[key] for r in results])
