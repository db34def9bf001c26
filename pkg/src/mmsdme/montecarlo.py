"""Seeded Monte-Carlo driver.

Trials are grouped into fixed-size blocks; block ``i`` of a run seeded with
``seed`` draws from ``SeedSequence(seed, spawn_key=(*key, i))``.  Blocks are
reduced in index order, so results do not depend on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def block_size(per_trial_cost: int, budget: int = 4_000_000, cap: int = 4096) -> int:
    return int(max(1, min(cap, budget // max(1, per_trial_cost))))


@dataclass
class TrialResult:
    sq_errors: np.ndarray
    estimates: np.ndarray
    extra: np.ndarray | None = None

    @property
    def trials(self) -> int:
        return len(self.sq_errors)

    @property
    def mse(self) -> float:
        return float(np.mean(self.sq_errors))

    @property
    def ci_halfwidth(self) -> float:
        if self.trials < 2:
            return float("inf")
        return float(1.96 * np.std(self.sq_errors, ddof=1) / np.sqrt(self.trials))

    def bias_norm(self, target) -> float:
        return float(np.linalg.norm(self.estimates.mean(axis=0) - np.asarray(target)))


def run_trials(trial_fn, target, trials: int, seed: int, block: int, key=(), threads: int = 1) -> TrialResult:
    """Call ``trial_fn(batch, rng)`` on consecutive blocks; it returns estimates ``(batch, d)``
    and optionally a per-trial auxiliary array as a second value."""
    target = np.asarray(target, dtype=float)
    sizes = [min(block, trials - i) for i in range(0, trials, block)]

    def one(i):
        out = trial_fn(sizes[i], substream(seed, *key, i))
        return out if isinstance(out, tuple) else (out, None)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    est = np.concatenate([p[0] for p in parts], axis=0)
    extra = None
    if parts and parts[0][1] is not None:
        extra = np.concatenate([p[1] for p in parts], axis=0)
    sq = np.sum((est - target) ** 2, axis=-1)
    return TrialResult(sq, est, extra)
