"""Mean estimation for vectors in the l-infinity ball of radius ``r_inf``.

Inputs are mapped to ``[0, 1]^d``, split into ``m`` bit planes by the
quantizer, and every plane is sent through the binary mechanism with its own
flip probability.  Budgets are split geometrically (weights ``4^(-k/3)``) so
that the high-order planes are the least noisy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import binary, quantizer, rr
from .binary import MessageBundle, SamplingPlan
from .exceptions import InputDomainError, MalformedMessageError, ParameterError

LDP = "ldp"
MMS = "mms"
MODES = (LDP, MMS)


def check_mode(mode: str) -> str:
    mode = str(mode).lower()
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class LinfConfig:
    d: int
    n: int
    m: int
    s: int
    v: float
    r_inf: float
    mode: str = LDP

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be positive")
        if self.m < 1:
            raise ParameterError("m must be at least 1")
        if not self.v > 0:
            raise ParameterError("total budget v must be positive")
        if not self.r_inf > 0:
            raise ParameterError("r_inf must be positive")
        object.__setattr__(self, "mode", check_mode(self.mode))
        binary.make_plan(self.d, self.s)

    @property
    def plan(self) -> SamplingPlan:
        return binary.make_plan(self.d, self.s)

    @property
    def bits_per_client(self) -> int:
        return self.m * self.plan.bits_per_client

    def allocation(self) -> "BudgetAllocation":
        return allocate_budgets(self.v, self.m, self.s)

    def level_flip_probs(self) -> list[float]:
        return list(self.allocation().p_k)


@dataclass(frozen=True)
class BudgetAllocation:
    v_k: tuple
    p_k: tuple
    f_k: tuple = field(default=())

    @property
    def m(self) -> int:
        return len(self.p_k)

    @classmethod
    def noiseless(cls, m: int) -> "BudgetAllocation":
        return cls((math.inf,) * m, (0.0,) * m, (1.0 / m,) * m)


def allocation_weights(m: int) -> np.ndarray:
    """Normalised weights ``f_k``: ``4^(-k/3)`` for ``k < m`` and ``4^(-(m-1)/3)`` for the top-up."""
    if m < 1:
        raise ParameterError("m must be at least 1")
    k = np.arange(1, m + 1, dtype=float)
    w = 4.0 ** (-k / 3.0)
    w[-1] = 4.0 ** (-(m - 1) / 3.0)
    return w / w.sum()


def allocate_budgets(v: float, m: int, s: int) -> BudgetAllocation:
    if not v > 0:
        raise ParameterError("total budget v must be positive")
    if s < 1:
        raise ParameterError("s must be positive")
    f = allocation_weights(m)
    v_k = f * v
    p_k = [rr.flip_prob_for_budget(vk / s) for vk in v_k]
    for k, p in enumerate(p_k, 1):
        rr.require_nondegenerate(p, f"level {k} budget")
    return BudgetAllocation(tuple(float(x) for x in v_k), tuple(p_k), tuple(float(x) for x in f))


@dataclass(frozen=True)
class LinfBundle:
    per_level: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_level", tuple(self.per_level))
        levels = [b.level for b in self.per_level]
        if levels != list(range(1, len(levels) + 1)):
            raise MalformedMessageError("levels must be numbered 1..m in order")

    @property
    def m(self) -> int:
        return len(self.per_level)


def to_unit(x, r_inf: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(np.abs(x) > r_inf * (1 + 1e-12)):
        raise InputDomainError(f"input outside the l-infinity ball of radius {r_inf:g}")
    return np.clip((x + r_inf) / (2.0 * r_inf), 0.0, 1.0)


def from_unit(z, r_inf: float) -> np.ndarray:
    return 2.0 * r_inf * np.asarray(z) - r_inf


def _check_alloc(cfg: LinfConfig, alloc: BudgetAllocation):
    if alloc.m != cfg.m:
        raise MalformedMessageError(f"allocation has {alloc.m} levels, config expects {cfg.m}")


def sample_linf(X, cfg: LinfConfig, alloc: BudgetAllocation, rng: np.random.Generator):
    """Vectorised randomizer: ``X`` of shape ``(..., d)`` to arrays of shape ``(..., m, s)``."""
    _check_alloc(cfg, alloc)
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != cfg.d:
        raise ParameterError(f"dimension mismatch: expected {cfg.d}, got {X.shape[-1]}")
    planes = quantizer.decompose(to_unit(X, cfg.r_inf), cfg.m, rng).planes
    plan = cfg.plan
    coords, bits = [], []
    for k in range(cfg.m):
        c, b = binary.sample_messages(planes[k], plan, alloc.p_k[k], rng)
        coords.append(c)
        bits.append(b)
    return np.stack(coords, axis=-2), np.stack(bits, axis=-2)


def randomize_linf(x, cfg: LinfConfig, alloc: BudgetAllocation, rng: np.random.Generator) -> LinfBundle:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("randomize_linf takes a single vector")
    coords, bits = sample_linf(x, cfg, alloc, rng)
    return LinfBundle(MessageBundle(coords[k], bits[k], cfg.plan, alloc.p_k[k], k + 1)
                      for k in range(cfg.m))


def combine_levels(level_estimates, cfg: LinfConfig) -> np.ndarray:
    return from_unit(quantizer.combine_planes(level_estimates, cfg.m), cfg.r_inf)


def estimate_from_batch(coords, bits, cfg: LinfConfig, alloc: BudgetAllocation) -> np.ndarray:
    """Analyzer over per-client arrays shaped ``(..., n, m, s)``."""
    _check_alloc(cfg, alloc)
    coords, bits = np.asarray(coords), np.asarray(bits)
    if coords.shape[-2] != cfg.m:
        raise MalformedMessageError("level count mismatch")
    levels = [binary.estimate_from_batch(coords[..., k, :], bits[..., k, :], cfg.plan, alloc.p_k[k])
              for k in range(cfg.m)]
    return combine_levels(levels, cfg)


def analyze_linf(bundles: Sequence[LinfBundle], cfg: LinfConfig, alloc: BudgetAllocation) -> np.ndarray:
    bundles = list(bundles)
    if not bundles:
        raise ParameterError("analyze_linf needs at least one bundle")
    _check_alloc(cfg, alloc)
    levels = []
    for k in range(cfg.m):
        per = []
        for b in bundles:
            if b.m != cfg.m:
                raise MalformedMessageError(f"bundle has {b.m} levels, config expects {cfg.m}")
            per.append(b.per_level[k])
        levels.append(binary.analyze_binary(per, cfg.plan, alloc.p_k[k]).values)
    return combine_levels(levels, cfg)


def analyze_linf_channels(channels, cfg: LinfConfig, alloc: BudgetAllocation, n: int) -> np.ndarray:
    """Analyzer over shuffled channels ``{level k: [(block j, coords, bits), ...]}``."""
    _check_alloc(cfg, alloc)
    if sorted(channels) != list(range(1, cfg.m + 1)):
        raise MalformedMessageError("channels must cover levels 1..m")
    levels = [binary.analyze_channels(channels[k], cfg.plan, alloc.p_k[k - 1], n).values
              for k in range(1, cfg.m + 1)]
    return combine_levels(levels, cfg)


def mms_budget_for_linf(n: int, s: int, eps: float, delta: float, strict: bool = True) -> float:
    """Total budget ``v = sqrt(s n eps^2 / (4 log(1/delta)))`` for central target ``(eps, delta)``."""
    if strict and eps > 1.0:
        raise ParameterError("the shuffled-model parameter choice requires eps <= 1")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    if eps <= 0 or n < 1 or s < 1:
        raise ParameterError("need eps > 0, n >= 1, s >= 1")
    return math.sqrt(s * n * eps * eps / (4.0 * math.log(1.0 / delta)))


def eps_delta_linf(n: int, s: int, v: float, delta: float) -> float:
    """Closed-form central epsilon ``2 sqrt(v^2 log(1/delta) / (s n))``."""
    return 2.0 * math.sqrt(v * v * math.log(1.0 / delta) / (s * n))


def recommended_levels(n: int, eps: float, d: int) -> int:
    """``max(1, ceil(log_4(n eps^2 / d)))``."""
    ratio = n * eps * eps / d
    return max(1, math.ceil(math.log(ratio, 4))) if ratio > 1 else 1


def linf_ldp_mse_bound(d: int, n: int, s: int, m: int, eps0: float, r_inf: float = 1.0) -> float:
    """Explicit-constant LDP bound ``r^2 (3d^2/(ns) + 5 d^2 s/(n eps0^2) + d/(n 4^m))``."""
    if eps0 <= 0:
        raise ParameterError("eps0 must be positive")
    return r_inf**2 * (3 * d * d / (n * s) + 5 * d * d * s / (n * eps0**2) + d / (n * 4.0**m))


def linf_mms_mse_bound(d: int, n: int, s: int, m: int, eps: float, delta: float,
                       r_inf: float = 1.0) -> float:
    """Explicit-constant shuffled bound ``r^2 (3d^2(1/s-1/d)/n + 5 d^2 log(1/delta)/(n eps)^2 + d/(n 4^m))``."""
    if eps <= 0 or not 0 < delta < 1:
        raise ParameterError("need eps > 0 and delta in (0, 1)")
    return r_inf**2 * (3 * d * d * (1 / s - 1 / d) / n
                       + 5 * d * d * math.log(1 / delta) / (n * n * eps * eps)
                       + d / (n * 4.0**m))


def linf_mms_mse_order(d: int, n: int, s: int, m: int, eps: float, delta: float,
                       r_inf: float = 1.0) -> float:
    """Max-form ``r^2 d^2/n^2 max{n/(d 4^m), n(1/s - 1/d), log(1/delta)/eps^2}``."""
    return r_inf**2 * d * d / n**2 * max(n / (d * 4.0**m), n * (1 / s - 1 / d),
                                         math.log(1 / delta) / eps**2)


def linf_mse_bounds(cfg: LinfConfig, eps0: float | None = None, eps: float | None = None,
                    delta: float | None = None) -> float:
    if cfg.mode == LDP:
        return linf_ldp_mse_bound(cfg.d, cfg.n, cfg.s, cfg.m, cfg.v if eps0 is None else eps0,
                                  cfg.r_inf)
    if eps is None or delta is None:
        raise ParameterError("shuffled-model bound needs eps and delta")
    return linf_mms_mse_bound(cfg.d, cfg.n, cfg.s, cfg.m, eps, delta, cfg.r_inf)


def linf_worst_case_mse(cfg: LinfConfig, alloc: BudgetAllocation | None = None) -> float:
    """Upper bound on the expected squared error over all inputs in the ball.

    ``4 r^2 [sum_k w_k^2 (a d V_k + (a-1) d)/n + d/(n 4^m)]`` where ``w_k`` are the
    reconstruction weights and ``V_k`` the 2RR variance of level ``k``.  The
    factor 4 comes from mapping ``[0, 1]`` back to ``[-r, r]``.
    """
    alloc = alloc or cfg.allocation()
    plan = cfg.plan
    w = quantizer.level_weights(cfg.m)
    lvl = np.array([binary.client_variance(plan, p, cfg.d) for p in alloc.p_k]) / cfg.n
    return 4 * cfg.r_inf**2 * (float(np.sum(w**2 * lvl)) + cfg.d / (cfg.n * 4.0**cfg.m))


def linf_expected_mse(X, cfg: LinfConfig, alloc: BudgetAllocation | None = None) -> float:
    """Exact expected squared error of the estimator for the given client inputs ``X`` (n, d)."""
    alloc = alloc or cfg.allocation()
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    levels, residual = quantizer.prefix_levels(to_unit(X, cfg.r_inf), cfg.m)
    q = quantizer.top_up_bias(residual, cfg.m)
    w = quantizer.level_weights(cfg.m)
    plan = cfg.plan
    total = 0.0
    for k in range(cfg.m):
        ones = levels[k].sum(axis=-1) if k < cfg.m - 1 else q.sum(axis=-1)
        # E||u||^2 = sum q for the top-up plane
        per_client = plan.a * plan.d * rr.two_rr_mse(alloc.p_k[k]) + (plan.a - 1) * ones
        total += w[k] ** 2 * float(np.sum(per_client)) / n**2
    quant = 4.0 ** -(cfg.m - 1) * float(np.sum(q * (1 - q))) / n**2
    return 4 * cfg.r_inf**2 * (total + quant)
