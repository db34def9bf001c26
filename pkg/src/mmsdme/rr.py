"""Unbiased binary randomized response (2RR).

A bit ``b`` is flipped with probability ``p`` and the (possibly flipped) bit
``c`` is reported as ``(c - p) / (1 - 2p)``, which is unbiased for ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateBudgetError, ParameterError
from .rdp import RdpCurve

#: Returned by :func:`ldp_of_flip_prob` for ``p = 0`` (no privacy at all).
INFINITE_BUDGET = math.inf

#: Flip probabilities within this distance of 1/2 are treated as degenerate.
DEGENERACY_TOL = 1e-12


def check_flip_prob(p: float, allow_half: bool = False) -> float:
    p = float(p)
    if not math.isfinite(p) or p < 0.0:
        raise ParameterError(f"flip probability must be in [0, 1/2), got {p!r}")
    if p > 0.5 or (p == 0.5 and not allow_half):
        raise ParameterError(f"flip probability must be in [0, 1/2), got {p!r}")
    return p


def support(p: float) -> tuple[float, float]:
    """The two output values ``(low, high)`` of 2RR with flip probability ``p``."""
    p = check_flip_prob(p)
    return -p / (1.0 - 2.0 * p), (1.0 - p) / (1.0 - 2.0 * p)


@dataclass(frozen=True)
class PrivateBit:
    """One 2RR report.  ``bit`` selects the support point, ``value`` is its real value."""

    bit: int
    p: float

    @property
    def value(self) -> float:
        return support(self.p)[self.bit]


def two_rr_output(b: int, flip: bool, p: float) -> PrivateBit:
    """Deterministic part of 2RR: report ``b`` (or ``1 - b`` when ``flip``)."""
    if b not in (0, 1):
        raise ParameterError("input must be a bit")
    check_flip_prob(p)
    return PrivateBit(int(b) ^ int(bool(flip)), float(p))


def randomize_bit(b: int, p: float, rng: np.random.Generator) -> PrivateBit:
    """Privatize a single bit; the coin flips with probability ``p``."""
    check_flip_prob(p)
    return two_rr_output(b, rng.random() < p, p)


def randomize_bits(bits, p: float, rng: np.random.Generator) -> np.ndarray:
    """Vectorised 2RR on an integer array; returns the reported support bits."""
    check_flip_prob(p)
    bits = np.asarray(bits)
    flips = rng.random(bits.shape) < p
    return (bits.astype(np.uint8) ^ flips).astype(np.uint8)


def decode_bits(report_bits, p: float) -> np.ndarray:
    lo, hi = support(p)
    r = np.asarray(report_bits, dtype=float)
    return lo + r * (hi - lo)


def two_rr_mse(p: float) -> float:
    p = check_flip_prob(p)
    return p * (1.0 - p) / (1.0 - 2.0 * p) ** 2


def ldp_of_flip_prob(p: float) -> float:
    """Pure LDP level ``log((1-p)/p)``; :data:`INFINITE_BUDGET` when ``p == 0``."""
    p = check_flip_prob(p, allow_half=True)
    if p == 0.0:
        return INFINITE_BUDGET
    # log1p form keeps relative accuracy as p -> 1/2
    return math.log1p((1.0 - 2.0 * p) / p)


def flip_prob_for_budget(v: float) -> float:
    """Flip probability ``(1 - sqrt(v^2 / (v^2 + 4))) / 2`` whose 2RR is at most ``v``-LDP.

    ``v = 0`` gives 1/2 (see :func:`is_degenerate`); ``v = inf`` gives 0.
    """
    v = float(v)
    if math.isnan(v) or v < 0.0:
        raise ParameterError(f"budget must be nonnegative, got {v!r}")
    if math.isinf(v):
        return 0.0
    # 1 - sqrt(v^2/(v^2+4)) written without cancellation for large v
    r = v / math.sqrt(v * v + 4.0)
    return 0.5 * (4.0 / (v * v + 4.0)) / (1.0 + r)


def is_degenerate(p: float) -> bool:
    return p >= 0.5 - DEGENERACY_TOL


def require_nondegenerate(p: float, what: str = "budget") -> float:
    if is_degenerate(p):
        raise DegenerateBudgetError(f"{what} too small: flip probability {p!r} reaches 1/2")
    return p


def two_rr_rdp(p: float) -> RdpCurve:
    """Exact Renyi-DP curve of 2RR.

    ``eps(alpha) = log(p^a (1-p)^(1-a) + p^(1-a) (1-p)^a) / (a - 1)``, evaluated
    in log space; its limit as ``alpha -> inf`` is ``log((1-p)/p)``.
    """
    p = check_flip_prob(p)
    if p == 0.0:
        raise ParameterError("2RR with p = 0 has unbounded Renyi divergence")
    lp, lq = math.log(p), math.log1p(-p)

    def eps(a):
        t1 = a * lp + (1.0 - a) * lq
        t2 = (1.0 - a) * lp + a * lq
        return np.logaddexp(t1, t2) / (a - 1.0)

    return RdpCurve(eps, label=f"2rr(p={p:g})")
