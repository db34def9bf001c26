"""Privacy accounting: local composition, amplification by shuffling, certification."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rr
from .exceptions import AmplificationRangeError, CertificationError, ParameterError
from .rdp import DpGuarantee, RdpCurve, compose, rdp_to_dp

GIRGIS = "girgis"
FELDMAN = "feldman"
#: Default universal constant for the Feldman-style bound (not fixed by theory).
FELDMAN_C = 8.0


def shuffle_amplify(eps0: float, n: int, variant: str = GIRGIS, c: float = FELDMAN_C) -> RdpCurve:
    """RDP curve of shuffling ``n`` messages from an ``eps0``-LDP randomizer.

    ``girgis``: ``2 alpha (e^eps0 - 1)^2 / n`` for ``alpha^4 e^(5 eps0) <= n/9``.
    ``feldman``: ``c alpha (e^eps0 - 1)^2 / (n e^eps0)`` for ``alpha <= n/(16 eps0 e^eps0)``.
    """
    if not eps0 > 0 or math.isinf(eps0):
        raise ParameterError("eps0 must be positive and finite")
    if n < 1:
        raise ParameterError("n must be positive")
    em1 = math.expm1(eps0)
    if variant == GIRGIS:
        rho = 2.0 * em1 * em1 / n
        cap = math.exp((math.log(n / 9.0) - 5.0 * eps0) / 4.0)
    elif variant == FELDMAN:
        if not c > 0:
            raise ParameterError("Feldman constant c must be positive")
        rho = c * em1 * em1 / (n * math.exp(eps0))
        cap = n / (16.0 * eps0 * math.exp(eps0))
    else:
        raise ParameterError(f"unknown amplification variant {variant!r}")
    return RdpCurve(lambda a: rho * a, cap, f"{variant}(eps0={eps0:.4g},n={n})")


def local_rdp(flip_probs, s: int) -> RdpCurve:
    """One client's composed RDP: ``s`` 2RR messages per level."""
    return compose([rr.two_rr_rdp(p).scale(s) for p in flip_probs])


def shuffled_rdp(flip_probs, s: int, n: int, variant: str = GIRGIS, c: float = FELDMAN_C) -> RdpCurve:
    """Composition over levels and the ``s`` shufflers of each level."""
    curves = []
    for p in flip_probs:
        curves.append(shuffle_amplify(rr.ldp_of_flip_prob(p), n, variant, c).scale(s))
    return compose(curves)


@dataclass
class CertificationReport:
    mode: str
    n: int
    d: int
    s: int
    m: int
    v: float
    target: float
    delta: float | None
    achieved: float
    alpha_star: float | None = None
    variant: str = ""
    grid: str = ""
    clamped: bool = False
    per_level: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.achieved <= self.target * (1 + 1e-9)

    CSV_FIELDS = ("mode", "n", "d", "s", "m", "v", "eps_target", "delta", "eps_achieved", "alpha_star")

    def csv_row(self) -> dict:
        return {"mode": self.mode, "n": self.n, "d": self.d, "s": self.s, "m": self.m,
                "v": repr(self.v), "eps_target": repr(self.target),
                "delta": "" if self.delta is None else repr(self.delta),
                "eps_achieved": repr(self.achieved),
                "alpha_star": "" if self.alpha_star is None else repr(self.alpha_star)}

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        if header:
            w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()

    def render(self) -> str:
        lines = [f"mode: {self.mode}   n={self.n} d={self.d} s={self.s} m={self.m} v={self.v:.6g}"]
        if self.mode == "ldp":
            lines.append(f"local epsilon0: {self.achieved:.6g} (target {self.target:.6g})")
        else:
            lines.append(f"central epsilon: {self.achieved:.6g} at delta={self.delta:g} "
                         f"(target {self.target:.6g}, amplification={self.variant})")
            star = "none" if self.alpha_star is None else f"{self.alpha_star:.6g}"
            lines.append(f"optimal order alpha*: {star}   grid: {self.grid}")
            if self.clamped:
                lines.append("note: negative conversion result clamped to 0")
        for row in self.per_level:
            lines.append("  level {level}: p={p:.6g} eps0/message={eps0_message:.6g} "
                         "contribution={contribution:.6g}".format(**row))
        lines.append("CERTIFIED" if self.passed else "NOT CERTIFIED")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def certify(cfg, mode: str, target: float, delta: float | None = None, variant: str = GIRGIS,
            c: float = FELDMAN_C, raise_on_failure: bool = True) -> CertificationReport:
    """Check a configured mechanism against a privacy target.

    ``cfg`` is any config exposing ``n``, ``d``, ``s``, ``m`` and
    ``level_flip_probs()``.  In ``ldp`` mode ``target`` is ``eps0`` and the
    achieved value is ``sum_k s log((1-p_k)/p_k)``.  In ``mms`` mode ``target``
    is the central ``eps`` at ``delta``: per-level amplified curves are
    composed and converted.
    """
    mode = str(mode).lower()
    probs = list(cfg.level_flip_probs())
    s, n = cfg.s, cfg.n
    v = float(getattr(cfg, "v", float("nan")))
    if mode == "ldp":
        per_level, total = [], 0.0
        for k, p in enumerate(probs, 1):
            e = rr.ldp_of_flip_prob(p)
            per_level.append({"level": k, "p": p, "eps0_message": e, "contribution": s * e})
            total += s * e
        report = CertificationReport("ldp", n, cfg.d, s, len(probs), v, float(target), None, total,
                                     per_level=per_level)
    elif mode == "mms":
        if delta is None:
            raise ParameterError("mms certification needs delta")
        curves, per_level = [], []
        for k, p in enumerate(probs, 1):
            e = rr.ldp_of_flip_prob(p)
            curve = shuffle_amplify(e, n, variant, c).scale(s)
            curves.append(curve)
            per_level.append({"level": k, "p": p, "eps0_message": e,
                              "contribution": float(curve.evaluate(2.0)), "cap": curve.cap})
        try:
            dp: DpGuarantee = rdp_to_dp(compose(curves), delta)
        except AmplificationRangeError as exc:
            if raise_on_failure:
                raise
            # no admissible order: nothing can be certified
            return CertificationReport("mms", n, cfg.d, s, len(probs), v, float(target), delta,
                                       math.inf, None, variant, f"empty ({exc})", False, per_level)
        report = CertificationReport("mms", n, cfg.d, s, len(probs), v, float(target), delta,
                                     dp.epsilon, dp.alpha_star, variant, dp.grid, dp.clamped,
                                     per_level)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    if raise_on_failure and not report.passed:
        raise CertificationError(
            f"{mode} certification failed: achieved {report.achieved:.6g} > target {target:.6g}",
            achieved=report.achieved, report=report)
    return report


def calibrate_mms_budget(make_cfg, eps: float, delta: float, variant: str = GIRGIS,
                         c: float = FELDMAN_C, v_hi: float = 64.0, iters: int = 60):
    """Largest total budget ``v`` whose configuration certifies at ``(eps, delta)``.

    ``make_cfg(v)`` builds the configuration.  Bisection on ``v``; returns
    ``(v, report)`` or raises :class:`CertificationError` when even tiny ``v``
    fails.
    """
    from .exceptions import DegenerateBudgetError

    def ok(v):
        try:
            r = certify(make_cfg(v), "mms", eps, delta, variant, c, raise_on_failure=False)
        except DegenerateBudgetError:
            return None
        return r if r.achieved <= eps else None

    lo, hi = 0.0, v_hi
    best = None
    r = ok(hi)
    if r is not None:
        return hi, r
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        r = ok(mid)
        if r is not None:
            lo, best = mid, r
        else:
            hi = mid
    if best is None:
        raise CertificationError(f"no budget certifies eps={eps:g}, delta={delta:g}")
    return lo, best


def strong_composition(eps_step: float, T: int, delta_slack: float) -> float:
    """``sqrt(2 T log(1/delta')) eps + T eps (e^eps - 1)``."""
    if eps_step > 700:
        return math.inf
    return math.sqrt(2.0 * T * math.log(1.0 / delta_slack)) * eps_step + T * eps_step * math.expm1(eps_step)


def subsampled_eps(eps: float, q: float) -> float:
    """Amplification by subsampling: ``log(1 + q (e^eps - 1))``."""
    if not 0 < q <= 1:
        raise ParameterError("sampling ratio must lie in (0, 1]")
    if eps < 1.0 or q == 1:
        return math.log1p(q * math.expm1(eps)) if q < 1 else eps
    return float(np.logaddexp(math.log1p(-q), math.log(q) + eps))


def closed_form_eps(rho: float, delta: float) -> float:
    """``2 sqrt(rho log(1/delta))``: the conversion bound for ``eps(alpha) = rho alpha``."""
    return 2.0 * math.sqrt(rho * math.log(1.0 / delta))
