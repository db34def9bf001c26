"""Mean estimation for vectors in the l2 ball via a randomized Hadamard rotation.

Each client rotates ``x`` with ``U = H D / sqrt(d')`` (``d'`` the next power of
two, ``D`` a public random sign diagonal), clips coordinates to
``r_inf = 10 r2 sqrt(log(d n / beta) / d)`` and runs the l-infinity mechanism.
The server inverts the rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linf
from .exceptions import InputDomainError, ParameterError
from .linf import BudgetAllocation, LinfBundle, LinfConfig


def fwht(x) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform along the last axis (length a power of two)."""
    a = np.array(x, dtype=float, copy=True)
    n = a.shape[-1]
    if n & (n - 1):
        raise ParameterError("transform length must be a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        v = a.reshape(lead + (n // (2 * h), 2, h))
        top = v[..., 0, :] + v[..., 1, :]
        bot = v[..., 0, :] - v[..., 1, :]
        v[..., 0, :] = top
        v[..., 1, :] = bot
        h *= 2
    return a


def next_pow2(d: int) -> int:
    return 1 << (int(d) - 1).bit_length()


@dataclass(frozen=True)
class RotationSeed:
    seed: int
    d_pow2: int

    def __post_init__(self):
        if self.d_pow2 < 1 or self.d_pow2 & (self.d_pow2 - 1):
            raise ParameterError("d_pow2 must be a power of two")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("rotation seed must be a 64-bit unsigned value")

    @classmethod
    def for_dim(cls, d: int, seed: int) -> "RotationSeed":
        return cls(int(seed), next_pow2(d))

    def signs(self) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(self.seed), 0x52])))
        return rng.integers(0, 2, size=self.d_pow2) * 2.0 - 1.0


def _pad(x, d_pow2: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] > d_pow2:
        raise ParameterError("vector longer than the rotation dimension")
    if x.shape[-1] == d_pow2:
        return x
    pad = np.zeros(x.shape[:-1] + (d_pow2 - x.shape[-1],))
    return np.concatenate([x, pad], axis=-1)


def rotate(x, seed: RotationSeed, r2: float | None = None) -> np.ndarray:
    """``H D x_pad / sqrt(d')``; rejects inputs with ``||x||_2 > r2`` when ``r2`` is given."""
    x = np.asarray(x, dtype=float)
    if r2 is not None:
        norms = np.linalg.norm(x, axis=-1)
        if np.any(norms > r2 * (1 + 1e-12)):
            raise InputDomainError(f"input outside the l2 ball of radius {r2:g}")
    return fwht(_pad(x, seed.d_pow2) * seed.signs()) / math.sqrt(seed.d_pow2)


def unrotate(w, seed: RotationSeed, d: int | None = None) -> np.ndarray:
    """Inverse rotation ``D H w / sqrt(d')``, truncated to the first ``d`` coordinates."""
    x = fwht(np.asarray(w, dtype=float)) * seed.signs() / math.sqrt(seed.d_pow2)
    return x if d is None else x[..., :d]


def clip_coords(w, r_inf: float) -> tuple[np.ndarray, np.ndarray | int]:
    """Clamp every coordinate to ``[-r_inf, r_inf]``; also count clipped coordinates per vector."""
    w = np.asarray(w, dtype=float)
    out = np.clip(w, -r_inf, r_inf)
    count = np.sum(out != w, axis=-1)
    return out, (int(count) if np.ndim(count) == 0 else count)


def rotation_radius(r2: float, d: int, n: int, beta: float) -> float:
    """``10 r2 sqrt(log(d n / beta) / d)``."""
    if not 0 < beta < 1:
        raise ParameterError("beta must lie in (0, 1)")
    if r2 <= 0 or d < 1 or n < 1:
        raise ParameterError("need r2 > 0, d >= 1, n >= 1")
    return 10.0 * r2 * math.sqrt(math.log(d * n / beta) / d)


@dataclass(frozen=True)
class L2Config:
    d: int
    n: int
    m: int
    s: int
    v: float
    r2: float
    beta: float = 0.01
    rotation_seed: int = 0
    mode: str = linf.LDP

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError("d must be positive")
        if self.s > next_pow2(self.d):
            raise ParameterError("s cannot exceed the padded dimension")
        self.inner  # validates the remaining fields

    @property
    def d_pow2(self) -> int:
        return next_pow2(self.d)

    @property
    def r_inf(self) -> float:
        return rotation_radius(self.r2, self.d, self.n, self.beta)

    @property
    def seed(self) -> RotationSeed:
        return RotationSeed(int(self.rotation_seed), self.d_pow2)

    @property
    def inner(self) -> LinfConfig:
        return LinfConfig(self.d_pow2, self.n, self.m, self.s, self.v, self.r_inf, self.mode)

    @property
    def bits_per_client(self) -> int:
        return self.inner.bits_per_client

    def allocation(self) -> BudgetAllocation:
        return self.inner.allocation()

    def level_flip_probs(self) -> list[float]:
        return self.inner.level_flip_probs()


def prepare(X, cfg: L2Config):
    """Rotate and clip a batch; returns clipped rotated vectors and per-vector clip counts."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != cfg.d:
        raise ParameterError(f"dimension mismatch: expected {cfg.d}, got {X.shape[-1]}")
    return clip_coords(rotate(X, cfg.seed, cfg.r2), cfg.r_inf)


def sample_l2(X, cfg: L2Config, alloc: BudgetAllocation, rng: np.random.Generator):
    """Vectorised randomizer; returns ``(coords, bits, clip_counts)``."""
    W, clips = prepare(X, cfg)
    coords, bits = linf.sample_linf(W, cfg.inner, alloc, rng)
    return coords, bits, clips


def randomize_l2(x, cfg: L2Config, alloc: BudgetAllocation, rng: np.random.Generator,
                 return_clips: bool = False):
    w, clips = prepare(x, cfg)
    bundle = linf.randomize_linf(w, cfg.inner, alloc, rng)
    return (bundle, clips) if return_clips else bundle


def estimate_from_batch(coords, bits, cfg: L2Config, alloc: BudgetAllocation) -> np.ndarray:
    return unrotate(linf.estimate_from_batch(coords, bits, cfg.inner, alloc), cfg.seed, cfg.d)


def analyze_l2(bundles: Sequence[LinfBundle], cfg: L2Config, alloc: BudgetAllocation) -> np.ndarray:
    """Inverse rotation of the l-infinity analyzer output, truncated to ``d``.

    Clients and server must share ``cfg.rotation_seed``; a mismatch cannot be
    detected from the messages.
    """
    for b in bundles:
        if b.per_level and b.per_level[0].plan.d != cfg.d_pow2:
            raise ParameterError("bundle dimension does not match the rotation dimension")
    return unrotate(linf.analyze_linf(bundles, cfg.inner, alloc), cfg.seed, cfg.d)


def l2_worst_case_mse(cfg: L2Config) -> float:
    """Supremum of the expected error given no clipping (rotation preserves squared error)."""
    return linf.linf_worst_case_mse(cfg.inner)


def l2_ldp_mse_bound(d: int, n: int, s: int, m: int, eps0: float, r2: float, beta: float) -> float:
    """Explicit-constant l-infinity LDP bound with the rotation radius substituted."""
    return linf.linf_ldp_mse_bound(d, n, s, m, eps0, rotation_radius(r2, d, n, beta))


def l2_mms_mse_bound(d: int, n: int, s: int, m: int, eps: float, delta: float, r2: float,
                     beta: float) -> float:
    return linf.linf_mms_mse_bound(d, n, s, m, eps, delta, rotation_radius(r2, d, n, beta))
