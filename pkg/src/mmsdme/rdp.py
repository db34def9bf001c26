"""Renyi-DP curves, adaptive composition and conversion to (epsilon, delta)-DP."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import AmplificationRangeError, MechanismError, ParameterError

#: Smallest order on the conversion grid.
ALPHA_MIN = 1.0 + 2.0**-8
#: Largest order searched when a curve carries no validity cap.
ALPHA_MAX_UNCAPPED = 2.0**14
GRID_POINTS = 256


class RdpDomainError(MechanismError, ValueError):
    """An order alpha <= 1 or beyond a curve's validity cap was queried."""


@dataclass(frozen=True)
class RdpCurve:
    """A privacy-loss function ``alpha -> epsilon(alpha)`` on ``1 < alpha <= cap``.

    ``func`` must accept numpy arrays.  ``label`` is carried into reports.
    """

    func: Callable[[np.ndarray], np.ndarray]
    cap: float = math.inf
    label: str = ""
    parts: tuple = field(default=(), compare=False)

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        if np.any(a <= 1.0):
            raise RdpDomainError("Renyi order must exceed 1")
        if np.any(a > self.cap):
            raise RdpDomainError(f"order {float(np.max(a)):g} beyond validity cap {self.cap:g}")
        out = self.func(a)
        return float(out) if np.ndim(out) == 0 else out

    def evaluate(self, alpha):
        """Evaluate without domain checks (internal use on pre-validated grids)."""
        return self.func(np.asarray(alpha, dtype=float))

    def __add__(self, other: "RdpCurve") -> "RdpCurve":
        return compose([self, other])

    def scale(self, k: float) -> "RdpCurve":
        if k < 0:
            raise ParameterError("scale factor must be nonnegative")
        f = self.func
        return RdpCurve(lambda a: k * f(a), self.cap, f"{k:g}x{self.label}", (self,))


def zero_curve() -> RdpCurve:
    return RdpCurve(lambda a: np.zeros_like(a), label="zero")


def linear_curve(rho: float, cap: float = math.inf) -> RdpCurve:
    """``epsilon(alpha) = rho * alpha`` (the shape of every amplification bound used here)."""
    if rho < 0:
        raise ParameterError("rho must be nonnegative")
    return RdpCurve(lambda a: rho * a, cap, f"linear({rho:g})")


def compose(curves: Sequence[RdpCurve]) -> RdpCurve:
    """Adaptive composition: pointwise sum, validity is the smallest cap."""
    curves = list(curves)
    if not curves:
        raise ParameterError("compose needs at least one curve")
    if len(curves) == 1:
        return curves[0]
    funcs = [c.func for c in curves]

    def total(a):
        acc = funcs[0](a)
        for f in funcs[1:]:
            acc = acc + f(a)
        return acc

    cap = min(c.cap for c in curves)
    return RdpCurve(total, cap, "+".join(c.label for c in curves if c.label), tuple(curves))


@dataclass(frozen=True)
class DpGuarantee:
    epsilon: float
    delta: float
    alpha_star: float
    clamped: bool = False
    grid: str = ""

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ParameterError("epsilon must be finite")
        if not self.alpha_star > 1:
            raise ParameterError("alpha_star must exceed 1")


def _objective(curve: RdpCurve, delta: float):
    log_inv_delta = math.log(1.0 / delta)

    def obj(a):
        a = np.asarray(a, dtype=float)
        return curve.evaluate(a) + log_inv_delta / (a - 1.0) + np.log1p(-1.0 / a)

    return obj


def alpha_grid(cap: float = math.inf, points: int = GRID_POINTS) -> np.ndarray:
    hi = min(cap, ALPHA_MAX_UNCAPPED)
    if hi <= ALPHA_MIN:
        raise AmplificationRangeError(
            f"insufficient amplification range: validity cap {cap:g} <= {ALPHA_MIN:g}"
        )
    # geometric in (alpha - 1) so that orders close to 1 are resolved
    return 1.0 + np.geomspace(ALPHA_MIN - 1.0, hi - 1.0, points)


def rdp_to_dp(curve: RdpCurve, delta: float, points: int = GRID_POINTS) -> DpGuarantee:
    """Convert an RDP curve to ``(epsilon, delta)``-DP.

    Minimises ``eps(alpha) + log(1/delta)/(alpha-1) + log(1-1/alpha)`` over a
    geometric grid of ``points`` orders in ``[1+2^-8, min(cap, 2^14)]`` and
    refines the best grid cell with a bounded Brent search.  A negative value
    (possible through the ``log(1-1/alpha)`` term) is clamped to zero.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    grid = alpha_grid(curve.cap, points)
    obj = _objective(curve, delta)
    vals = obj(grid)
    i = int(np.argmin(vals))
    best_a, best_v = float(grid[i]), float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda a: float(obj(a)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        if res.success and res.fun < best_v:
            best_a, best_v = float(res.x), float(res.fun)
    clamped = best_v < 0.0
    desc = f"geometric[{grid[0]:.6g},{grid[-1]:.6g}]x{points}+brent"
    return DpGuarantee(max(best_v, 0.0), delta, best_a, clamped, desc)
