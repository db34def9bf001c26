"""Unbiased m-level stochastic binary decomposition of vectors in [0, 1]^d."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputDomainError, ParameterError

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BitDecomposition:
    """Deterministic bit planes ``levels[k-1] = b^(k)`` for ``k < m`` and the top-up bits ``u``.

    Arrays may carry leading batch axes; the last axis is the coordinate axis.
    """

    levels: np.ndarray  # shape (m-1, ..., d)
    top_up: np.ndarray  # shape (..., d)
    m: int

    @property
    def planes(self) -> np.ndarray:
        """All ``m`` bit vectors in transmission order, top-up last."""
        return np.concatenate([self.levels, self.top_up[None]], axis=0)


def level_weights(m: int) -> np.ndarray:
    """Reconstruction weights ``2^-1, ..., 2^-(m-1), 2^-(m-1)``."""
    if m < 1:
        raise ParameterError("m must be at least 1")
    k = np.arange(1, m + 1, dtype=float)
    w = 2.0 ** -k
    w[-1] = 2.0 ** -(m - 1)
    return w


def check_unit(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)) or np.any(z < -TOL) or np.any(z > 1 + TOL):
        raise InputDomainError("entries must lie in [0, 1]")
    return np.clip(z, 0.0, 1.0)


def prefix_levels(z, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary-expansion prefix: bit planes ``b^(1..m-1)`` and the residual ``z - z^(m-1)``."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ParameterError("m must be a positive integer")
    z = check_unit(z)
    levels = np.zeros((m - 1,) + z.shape, dtype=np.uint8)
    partial = np.zeros_like(z)
    for k in range(1, m):
        b = np.floor(2.0**k * (z - partial) + TOL)
        b = np.clip(b, 0, 1)
        levels[k - 1] = b
        partial = partial + b * 2.0**-k
    return levels, z - partial


def top_up_bias(residual, m: int) -> np.ndarray:
    return np.clip(2.0 ** (m - 1) * residual, 0.0, 1.0)


def decompose(z, m: int, rng: np.random.Generator) -> BitDecomposition:
    levels, residual = prefix_levels(z, m)
    bias = top_up_bias(residual, m)
    u = (rng.random(bias.shape) < bias).astype(np.uint8)
    return BitDecomposition(levels, u, int(m))


def reconstruct(dec: BitDecomposition) -> np.ndarray:
    return combine_planes(dec.planes, dec.m)


def combine_planes(planes, m: int) -> np.ndarray:
    """``sum_k w_k planes[k]`` along axis 0 (works on real-valued level estimates too)."""
    w = level_weights(m)
    planes = np.asarray(planes, dtype=float)
    if planes.shape[0] != m:
        raise ParameterError(f"expected {m} planes, got {planes.shape[0]}")
    return np.tensordot(w, planes, axes=(0, 0))


def quantizer_mse_bound(d: int, m: int) -> float:
    if d < 1 or m < 1:
        raise ParameterError("d and m must be positive")
    return d * 4.0 ** -m


def quantizer_variance(z, m: int) -> np.ndarray:
    """Exact per-coordinate variance ``4^-(m-1) q (1-q)`` with ``q`` the top-up bias."""
    _, residual = prefix_levels(z, m)
    q = top_up_bias(residual, m)
    return 4.0 ** -(m - 1) * q * (1 - q)
