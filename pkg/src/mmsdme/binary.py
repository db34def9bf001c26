"""Coordinate-sampled randomizer and analyzer for binary vectors.

A client splits its (zero-padded) vector into ``s`` blocks of ``a = ceil(d/s)``
coordinates, samples one coordinate per block and reports its 2RR bit.  The
server rescales each report by ``a`` and averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import rr
from .exceptions import InputDomainError, MalformedMessageError, ParameterError


@dataclass(frozen=True)
class SamplingPlan:
    d: int
    s: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.d!r}")
        if not isinstance(self.s, (int, np.integer)) or not 1 <= self.s <= self.d:
            raise ParameterError(f"need 1 <= s <= d, got s={self.s!r}, d={self.d}")

    @property
    def a(self) -> int:
        return -(-self.d // self.s)

    @property
    def padded_d(self) -> int:
        return self.s * self.a

    @property
    def coord_bits(self) -> int:
        """Bits needed for a coordinate offset inside one block."""
        return (self.a - 1).bit_length()

    @property
    def message_bits(self) -> int:
        return self.coord_bits + 1

    @property
    def bits_per_client(self) -> int:
        return self.s * self.message_bits

    def block_of(self, coord):
        return np.asarray(coord) // self.a


def make_plan(d: int, s: int) -> SamplingPlan:
    return SamplingPlan(int(d), int(s))


def bits_per_client(d: int, s: int, m: int = 1) -> int:
    """Payload bits ``m * s * (ceil(log2 ceil(d/s)) + 1)`` sent by one client."""
    return m * make_plan(d, s).bits_per_client


@dataclass(frozen=True)
class Message:
    coord: int
    value_bit: int


@dataclass(frozen=True, eq=False)
class MessageBundle:
    """The ``s`` messages of one client for one binary vector (one level)."""

    coords: np.ndarray
    bits: np.ndarray
    plan: SamplingPlan
    p: float
    level: int = 0

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64)
        bits = np.asarray(self.bits, dtype=np.uint8)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "bits", bits)
        if coords.shape != (self.plan.s,) or bits.shape != (self.plan.s,):
            raise MalformedMessageError(f"bundle must hold exactly s={self.plan.s} messages")
        if np.any(bits > 1):
            raise MalformedMessageError("value bits must be 0 or 1")
        blocks = np.arange(self.plan.s)
        if np.any(coords < blocks * self.plan.a) or np.any(coords >= (blocks + 1) * self.plan.a):
            raise MalformedMessageError("message coordinate outside its block")

    @property
    def messages(self) -> tuple[Message, ...]:
        return tuple(Message(int(c), int(b)) for c, b in zip(self.coords, self.bits))

    def decode(self) -> np.ndarray:
        """Sparse unbiased estimate of this client's vector (dummy coordinates dropped)."""
        out = np.zeros(self.plan.padded_d)
        out[self.coords] = self.plan.a * rr.decode_bits(self.bits, self.p)
        return out[: self.plan.d]

    def __eq__(self, other):
        if not isinstance(other, MessageBundle):
            return NotImplemented
        return (self.plan == other.plan and self.p == other.p and self.level == other.level
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.bits, other.bits))


@dataclass(frozen=True)
class MeanEstimate:
    values: np.ndarray
    n: int


def _as_bits(b, d=None) -> np.ndarray:
    arr = np.asarray(b)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise InputDomainError("binary vector entries must be 0 or 1")
    if d is not None and arr.shape[-1] != d:
        raise ParameterError(f"dimension mismatch: expected {d}, got {arr.shape[-1]}")
    return arr.astype(np.uint8)


def sample_messages(B, plan: SamplingPlan, p: float, rng: np.random.Generator):
    """Vectorised randomizer over leading axes of ``B`` (shape ``(..., d)``).

    Returns absolute coordinates and reported bits, both of shape ``(..., s)``.
    """
    rr.check_flip_prob(p)
    B = _as_bits(B, plan.d)
    lead = B.shape[:-1]
    if plan.padded_d > plan.d:
        pad = np.zeros(lead + (plan.padded_d - plan.d,), dtype=np.uint8)
        B = np.concatenate([B, pad], axis=-1)
    offsets = rng.integers(0, plan.a, size=lead + (plan.s,))
    coords = offsets + plan.a * np.arange(plan.s)
    chosen = np.take_along_axis(B, coords, axis=-1)
    return coords, rr.randomize_bits(chosen, p, rng)


def randomize_binary(b, plan: SamplingPlan, p: float, rng: np.random.Generator,
                     level: int = 0) -> MessageBundle:
    b = _as_bits(b, plan.d)
    if b.ndim != 1:
        raise ParameterError("randomize_binary takes a single vector; use sample_messages for batches")
    coords, bits = sample_messages(b, plan, p, rng)
    return MessageBundle(coords, bits, plan, float(p), level)


def aggregate(coords, bits, plan: SamplingPlan, p: float, n: int) -> np.ndarray:
    """Sum reports into per-coordinate counts and rescale to a mean estimate.

    ``coords``/``bits`` have shape ``(..., N)``: all messages belonging to one
    estimate along the last axis, any batch axes in front.  Only integer
    counts are accumulated, so the result does not depend on message order.
    """
    rr.check_flip_prob(p)
    if n < 1:
        raise ParameterError("need at least one client")
    coords = np.asarray(coords, dtype=np.int64)
    bits = np.asarray(bits)
    if coords.shape != bits.shape:
        raise MalformedMessageError("coords and bits must have matching shapes")
    if coords.size and (coords.min() < 0 or coords.max() >= plan.padded_d):
        raise MalformedMessageError("message coordinate out of range")
    lead = coords.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    flat = coords.reshape(rows, -1) + plan.padded_d * np.arange(rows)[:, None]
    size = rows * plan.padded_d
    total = np.bincount(flat.ravel(), minlength=size).astype(float)
    ones = np.bincount(flat.ravel(), weights=bits.reshape(rows, -1).ravel().astype(float),
                       minlength=size)
    lo, hi = rr.support(p)
    est = (plan.a / n) * (total * lo + ones * (hi - lo))
    return est.reshape(lead + (plan.padded_d,))[..., : plan.d]


def estimate_from_batch(coords, bits, plan: SamplingPlan, p: float) -> np.ndarray:
    """Mean estimate from per-client arrays shaped ``(..., n, s)``."""
    coords = np.asarray(coords)
    blocks = coords // plan.a
    if np.any(blocks != np.arange(plan.s)):
        raise MalformedMessageError("message coordinate outside its block")
    n = coords.shape[-2]
    lead = coords.shape[:-2]
    return aggregate(coords.reshape(lead + (-1,)), np.asarray(bits).reshape(lead + (-1,)),
                     plan, p, n)


def analyze_binary(bundles: Sequence[MessageBundle], plan: SamplingPlan | None = None,
                   p: float | None = None) -> MeanEstimate:
    """Server side: average the decoded reports of ``n`` clients."""
    bundles = list(bundles)
    if not bundles:
        raise ParameterError("analyze_binary needs at least one bundle")
    plan = plan or bundles[0].plan
    p = bundles[0].p if p is None else p
    for bd in bundles:
        if bd.plan != plan or bd.p != p:
            raise MalformedMessageError("all bundles must share the sampling plan and p")
    coords = np.concatenate([bd.coords for bd in bundles])
    bits = np.concatenate([bd.bits for bd in bundles])
    return MeanEstimate(aggregate(coords, bits, plan, p, len(bundles)), len(bundles))


def analyze_channels(channels: Iterable[tuple[int, np.ndarray, np.ndarray]], plan: SamplingPlan,
                     p: float, n: int) -> MeanEstimate:
    """Analyzer over shuffled block channels ``(block j, coords, bits)``."""
    all_c, all_b = [], []
    for j, coords, bits in sorted(channels, key=lambda ch: ch[0]):
        coords = np.asarray(coords, dtype=np.int64)
        if np.any(coords // plan.a != j):
            raise MalformedMessageError(f"message in channel {j} lies outside block {j}")
        all_c.append(coords)
        all_b.append(np.asarray(bits))
    if not all_c:
        raise ParameterError("no channels to analyze")
    return MeanEstimate(aggregate(np.concatenate(all_c), np.concatenate(all_b), plan, p, n), n)


def client_variance(plan: SamplingPlan, p: float, ones: float) -> float:
    """Exact ``E||y - b||^2`` over the ``d`` real coordinates for one client.

    ``ones`` is ``||b||^2``.  Each real coordinate is picked with probability
    ``1/a`` and carries 2RR variance ``a^2 V``, giving ``a d V + (a - 1)||b||^2``.
    """
    V = rr.two_rr_mse(p)
    return plan.a * plan.d * V + (plan.a - 1) * ones


def binary_ldp_mse_bound(d: int, n: int, s: int, eps0: float) -> float:
    """Worst-case MSE of the LDP binary mechanism with per-message budget ``eps0/s``.

    Equals ``d(a-1)/n + a d V / n`` with ``V = p(1-p)/(1-2p)^2``; when ``s`` divides
    ``d`` this is ``d(d/s - 1)/n + d^2 V/(s n)``.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    if eps0 < 0:
        raise ParameterError("eps0 must be nonnegative")
    plan = make_plan(d, s)
    p = rr.require_nondegenerate(rr.flip_prob_for_budget(eps0 / s))
    return client_variance(plan, p, d) / n


def mms_budget(n: int, s: int, eps: float, delta: float) -> float:
    """Per-message budget ``v = sqrt(n eps^2 / (4 s log(1/delta)))``."""
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    if eps <= 0:
        raise ParameterError("epsilon must be positive")
    if n < 1 or s < 1:
        raise ParameterError("n and s must be positive")
    return math.sqrt(n * eps * eps / (4.0 * s * math.log(1.0 / delta)))


def binary_mms_params(n: int, s: int, eps: float, delta: float, strict: bool = True):
    """``(v, p)`` for the shuffled binary mechanism at central target ``(eps, delta)``.

    ``strict`` enforces ``eps <= 1``, the regime in which the amplification
    argument behind this choice applies.
    """
    if strict and eps > 1.0:
        raise ParameterError("the shuffled-model parameter choice requires eps <= 1")
    v = mms_budget(n, s, eps, delta)
    p = rr.require_nondegenerate(rr.flip_prob_for_budget(v))
    return v, p


def eps_delta_binary(n: int, s: int, p: float, delta: float) -> float:
    """Closed-form central epsilon ``2 sqrt(s (1-2p)^2 log(1/delta) / (n p (1-p)))``."""
    return 2.0 * math.sqrt(s * (1 - 2 * p) ** 2 * math.log(1 / delta) / (n * p * (1 - p)))


def binary_mms_mse_bound(d: int, n: int, s: int, eps: float, delta: float) -> float:
    _, p = binary_mms_params(n, s, eps, delta, strict=False)
    return client_variance(make_plan(d, s), p, d) / n


@dataclass(frozen=True)
class BinaryConfig:
    """Parameters of the binary mechanism as a single-level configuration."""

    d: int
    n: int
    s: int
    p: float
    mode: str = "ldp"

    def __post_init__(self):
        make_plan(self.d, self.s)
        rr.check_flip_prob(self.p)
        if self.n < 1:
            raise ParameterError("n must be positive")

    m = 1

    @property
    def plan(self) -> SamplingPlan:
        return make_plan(self.d, self.s)

    @property
    def bits_per_client(self) -> int:
        return self.plan.bits_per_client

    def level_flip_probs(self) -> list[float]:
        return [self.p]
