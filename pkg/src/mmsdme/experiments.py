"""Monte-Carlo sweeps, baselines, lower-bound overlays and a toy DP-SGD loop."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import accountant, binary, l2, linf, montecarlo, rr
from .binary import BinaryConfig
from .exceptions import MechanismError, ParameterError
from .l2 import L2Config
from .linf import BudgetAllocation, LinfConfig

SCHEMA_VERSION = 1
MECHANISMS = ("binary", "linf", "l2", "laplace")


# --------------------------------------------------------------------------- baselines

def laplace_baseline_mse(n: int, d: int, r_inf: float, eps0: float) -> float:
    """``8 d r^2 / (n eps0^2)``: per-coordinate Laplace noise of scale ``2 r / eps0``."""
    if not eps0 > 0:
        raise ParameterError("eps0 must be positive")
    return 8.0 * d * r_inf**2 / (n * eps0**2)


def laplace_sample_mean(X, r_inf: float, eps0: float, rng: np.random.Generator) -> np.ndarray:
    """Sampled Laplace baseline: mean of ``x_i + Lap(2 r / eps0)`` over the client axis (-2)."""
    X = np.asarray(X, dtype=float)
    noise = rng.laplace(0.0, 2.0 * r_inf / eps0, size=X.shape)
    return (X + noise).mean(axis=-2)


# --------------------------------------------------------------------------- lower bounds

def lower_bound_branches(n: int, d: int, eps: float, delta: float, b: int, r2: float = 1.0) -> dict:
    """Central-model lower-bound shapes with unit constants (shape only).

    ``b >= d``: ``r2^2 max{d/(n eps)^2, 1/(n 4^(b/d))}``;
    ``b <= d``: ``r2^2 d max{1/(n eps)^2, 1/(n b)}``.  Both are reported at ``b = d``.
    """
    if eps <= 0 or b < 1:
        raise ParameterError("need eps > 0 and b >= 1")
    out = {}
    if b >= d:
        out["high_comm"] = r2**2 * max(d / (n * eps) ** 2, 1.0 / (n * 4.0 ** (b / d)))
    if b <= d:
        out["low_comm"] = r2**2 * d * max(1.0 / (n * eps) ** 2, 1.0 / (n * b))
    return out


def lower_bound_overlay(n: int, d: int, eps: float, delta: float, b: int, r2: float = 1.0) -> float:
    return max(lower_bound_branches(n, d, eps, delta, b, r2).values())


def ldp_lower_bound(n: int, d: int, eps0: float, b: int, r2: float = 1.0) -> float:
    """``r2^2 d / (n min{eps0^2, eps0, b})`` (shape only)."""
    return r2**2 * d / (n * min(eps0 * eps0, eps0, b))


# --------------------------------------------------------------------------- sweeps

@dataclass
class SweepSpec:
    mechanism: str = "linf"
    mode: str = "ldp"
    n: list = field(default_factory=lambda: [1])
    d: list = field(default_factory=lambda: [1])
    s: list = field(default_factory=lambda: [1])
    m: list = field(default_factory=lambda: [1])
    eps: list = field(default_factory=lambda: [1.0])
    delta: list = field(default_factory=lambda: [1e-5])
    radius: float = 1.0
    beta: float = 0.01
    trials: int = 1000
    seed: int = 0
    data: str = "uniform"
    mms_budget: str = "calibrated"
    variant: str = accountant.FELDMAN
    feldman_c: float = accountant.FELDMAN_C
    rotation_seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ParameterError(f"mechanism must be one of {MECHANISMS}")
        self.mode = linf.check_mode(self.mode)
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.mms_budget not in ("closed_form", "calibrated"):
            raise ParameterError("mms_budget must be 'closed_form' or 'calibrated'")
        if self.data not in ("uniform", "worst", "center"):
            raise ParameterError("data must be 'uniform', 'worst' or 'center'")
        for name in ("n", "d", "s", "m", "eps", "delta"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                setattr(self, name, [val])

    def grid(self):
        return itertools.product(self.n, self.d, self.s, self.m, self.eps,
                                 self.delta if self.mode == "mms" else [None])


REPORT_FIELDS = ("schema_version", "mechanism", "mode", "n", "d", "s", "m", "eps", "delta", "v",
                 "trials", "seed", "empirical_mse", "ci_halfwidth", "empirical_bias_norm",
                 "theory_bound", "explicit_bound", "bits_per_client", "clip_rate", "eps_certified",
                 "alpha_star", "error")


@dataclass
class EstimateReport:
    mechanism: str
    mode: str
    n: int
    d: int
    s: int
    m: int
    eps: float
    delta: float | None
    trials: int
    seed: int
    v: float = float("nan")
    empirical_mse: float = float("nan")
    ci_halfwidth: float = float("nan")
    empirical_bias_norm: float = float("nan")
    theory_bound: float = float("nan")
    explicit_bound: float = float("nan")
    bits_per_client: int = 0
    clip_rate: float = float("nan")
    eps_certified: float = float("nan")
    alpha_star: float = float("nan")
    error: str = ""

    def row(self) -> dict:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        out = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            out[f.name] = fmt(getattr(self, f.name))
        return out


def make_inputs(mechanism: str, n: int, d: int, radius: float, data: str,
                rng: np.random.Generator) -> np.ndarray:
    if mechanism == "binary":
        if data == "worst":
            return np.ones((n, d), dtype=np.uint8)
        return rng.integers(0, 2, size=(n, d)).astype(np.uint8)
    if mechanism == "l2":
        if data == "center":
            return np.zeros((n, d))
        X = rng.standard_normal((n, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        if data == "uniform":
            X *= rng.random((n, 1)) ** (1.0 / d)
        return X * radius
    if data == "worst":
        return np.full((n, d), radius)
    if data == "center":
        return np.zeros((n, d))
    return rng.uniform(-radius, radius, size=(n, d))


def _linf_like_cfg(spec: SweepSpec, n, d, s, m, v):
    if spec.mechanism == "l2":
        return L2Config(d, n, m, s, v, spec.radius, spec.beta, spec.rotation_seed, spec.mode)
    return LinfConfig(d, n, m, s, v, spec.radius, spec.mode)


def build_config(spec: SweepSpec, n, d, s, m, eps, delta):
    """Configuration and total budget for one grid point (not used for laplace)."""
    mech = spec.mechanism
    if mech == "binary":
        if spec.mode == "ldp":
            p = rr.require_nondegenerate(rr.flip_prob_for_budget(eps / s))
            return BinaryConfig(d, n, s, p, "ldp"), eps
        if spec.mms_budget == "closed_form":
            v, p = binary.binary_mms_params(n, s, eps, delta)
            return BinaryConfig(d, n, s, p, "mms"), v
        v, _ = accountant.calibrate_mms_budget(
            lambda v: BinaryConfig(d, n, s, rr.flip_prob_for_budget(v), "mms"), eps, delta,
            spec.variant, spec.feldman_c)
        return BinaryConfig(d, n, s, rr.flip_prob_for_budget(v), "mms"), v
    if spec.mode == "ldp":
        return _linf_like_cfg(spec, n, d, s, m, eps), eps
    if spec.mms_budget == "closed_form":
        v = linf.mms_budget_for_linf(n, s, eps, delta)
        return _linf_like_cfg(spec, n, d, s, m, v), v
    v, _ = accountant.calibrate_mms_budget(lambda v: _linf_like_cfg(spec, n, d, s, m, v), eps, delta,
                                           spec.variant, spec.feldman_c)
    return _linf_like_cfg(spec, n, d, s, m, v), v


def trial_function(cfg, X, alloc=None):
    """Batch trial closure ``fn(batch, rng) -> estimates`` for a configured mechanism."""
    X = np.asarray(X)
    if isinstance(cfg, BinaryConfig):
        def fn(batch, rng):
            Xb = np.broadcast_to(X, (batch,) + X.shape)
            c, b = binary.sample_messages(Xb, cfg.plan, cfg.p, rng)
            return binary.estimate_from_batch(c, b, cfg.plan, cfg.p)
        return fn
    alloc = alloc or cfg.allocation()
    if isinstance(cfg, L2Config):
        W, clips = l2.prepare(X, cfg)
        clipped = float(np.mean(clips > 0))

        def fn(batch, rng):
            Wb = np.broadcast_to(W, (batch,) + W.shape)
            c, b = linf.sample_linf(Wb, cfg.inner, alloc, rng)
            est = l2.estimate_from_batch(c, b, cfg, alloc)
            return est, np.full(batch, clipped)
        return fn

    def fn(batch, rng):
        Xb = np.broadcast_to(X, (batch,) + X.shape)
        c, b = linf.sample_linf(Xb, cfg, alloc, rng)
        return linf.estimate_from_batch(c, b, cfg, alloc)
    return fn


def simulate(cfg, X, trials: int, seed: int, key=(), alloc=None, threads: int = 1):
    """Monte-Carlo estimate of the squared error of a configured mechanism on inputs ``X``."""
    X = np.asarray(X)
    n, d = X.shape
    m = getattr(cfg, "m", 1)
    s = cfg.s
    cost = n * (d + 2 * m * s)
    return montecarlo.run_trials(trial_function(cfg, X, alloc), X.mean(axis=0), trials, seed,
                                 montecarlo.block_size(cost), key, threads)


def measured_bits(cfg, rng) -> int:
    """Payload bits of one client, measured by running the serialiser."""
    from . import shuffle

    x = np.zeros((1, cfg.d), dtype=np.uint8 if isinstance(cfg, BinaryConfig) else float)
    _, stats = shuffle.run_pipeline(x, cfg, "ldp", rng)
    return stats.bits_per_client[0]


def theory_bounds(spec: SweepSpec, cfg, n, d, s, m, eps, delta) -> tuple[float, float]:
    """``(rigorous worst-case MSE, explicit-constant bound)`` for a grid point."""
    if spec.mechanism == "binary":
        exact = binary.client_variance(cfg.plan, cfg.p, d) / n
        if spec.mode == "ldp":
            return exact, binary.binary_ldp_mse_bound(d, n, s, eps)
        return exact, binary.binary_mms_mse_bound(d, n, s, eps, delta)
    r = cfg.r_inf
    dd = cfg.inner.d if isinstance(cfg, L2Config) else d
    if isinstance(cfg, L2Config):
        exact = l2.l2_worst_case_mse(cfg)
    else:
        exact = linf.linf_worst_case_mse(cfg)
    if spec.mode == "ldp":
        explicit = linf.linf_ldp_mse_bound(dd, n, s, m, eps, r)
    else:
        explicit = linf.linf_mms_mse_bound(dd, n, s, m, eps, delta, r)
    return exact, explicit


def run_point(spec: SweepSpec, idx: int, n, d, s, m, eps, delta, threads: int = 1) -> EstimateReport:
    rep = EstimateReport(spec.mechanism, spec.mode, n, d, s, m, eps, delta, spec.trials, spec.seed)
    try:
        data_rng = montecarlo.substream(spec.seed, idx, 0)
        X = make_inputs(spec.mechanism, n, d, spec.radius, spec.data, data_rng)
        if spec.mechanism == "laplace":
            if spec.mode != "ldp":
                raise ParameterError("the Laplace baseline is only defined for the local model")
            rep.v = eps
            res = montecarlo.run_trials(
                lambda b, rng: laplace_sample_mean(np.broadcast_to(X, (b,) + X.shape), spec.radius, eps, rng),
                X.mean(axis=0), spec.trials, spec.seed, montecarlo.block_size(n * d), (idx, 1), threads)
            rep.theory_bound = rep.explicit_bound = laplace_baseline_mse(n, d, spec.radius, eps)
            rep.bits_per_client = 64 * d
        else:
            cfg, v = build_config(spec, n, d, s, m, eps, delta)
            rep.v = float(v)
            alloc = None
            if spec.noiseless and not isinstance(cfg, BinaryConfig):
                alloc = BudgetAllocation.noiseless(cfg.m)
            res = simulate(cfg, X, spec.trials, spec.seed, (idx, 1), alloc, threads)
            if alloc is None:
                rep.theory_bound, rep.explicit_bound = theory_bounds(spec, cfg, n, d, s, m, eps, delta)
            else:
                # coordinate sampling and quantization remain without flips
                inner = cfg.inner if isinstance(cfg, L2Config) else cfg
                rep.theory_bound = linf.linf_worst_case_mse(inner, alloc)
            rep.bits_per_client = measured_bits(cfg, montecarlo.substream(spec.seed, idx, 2))
            if isinstance(cfg, L2Config):
                rep.clip_rate = float(res.extra.mean())
            if spec.mode == "mms":
                cert = accountant.certify(cfg, "mms", eps, delta, spec.variant, spec.feldman_c,
                                          raise_on_failure=False)
                rep.eps_certified, rep.alpha_star = cert.achieved, cert.alpha_star
        rep.empirical_mse = res.mse
        rep.ci_halfwidth = res.ci_halfwidth
        rep.empirical_bias_norm = res.bias_norm(X.mean(axis=0))
    except (MechanismError, ValueError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[EstimateReport]:
    return [run_point(spec, i, *pt, threads=threads) for i, pt in enumerate(spec.grid())]


def reports_to_csv(reports, fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue() if fh is None else ""


# --------------------------------------------------------------------------- DP-SGD

@dataclass
class SgdSpec:
    T: int = 10
    k: int = 10
    n: int = 100
    d: int = 8
    eta: float = 0.1
    eps: float = 1.0
    delta: float = 1e-5
    r2: float = 1.0
    s: int | None = None
    m: int = 4
    beta: float = 0.01
    objective: str = "quadratic"
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError("T must be at least 1")
        if not 1 <= self.k <= self.n:
            raise ParameterError("need 1 <= k <= n")
        if self.objective != "quadratic":
            raise ParameterError("only the 'quadratic' toy objective is available")
        if self.s is None:
            self.s = l2.next_pow2(self.d)


@dataclass
class DpSgdPrivacy:
    q: float
    eps_tilde: float
    delta_round: float
    v: float
    flip_probs: list
    eps_step: float
    eps_total: float
    delta_total: float


def dpsgd_privacy(spec: SgdSpec) -> DpSgdPrivacy:
    """Per-round budget ``eps~ = n eps/(k sqrt(T log(2/delta)))``, subsampling and strong composition."""
    q = spec.k / spec.n
    eps_tilde = spec.n * spec.eps / (spec.k * math.sqrt(spec.T * math.log(2.0 / spec.delta)))
    delta_round = spec.n * spec.delta / (spec.k * spec.T)
    if not 0 < delta_round < 1:
        raise ParameterError("per-round delta n*delta/(k*T) must lie in (0, 1)")
    v = linf.mms_budget_for_linf(spec.k, spec.s, eps_tilde, delta_round, strict=False)
    alloc = linf.allocate_budgets(v, spec.m, spec.s)
    eps_t = accountant.subsampled_eps(eps_tilde, q)
    total = accountant.strong_composition(eps_t, spec.T, spec.delta / 2.0)
    return DpSgdPrivacy(q, eps_tilde, delta_round, v, list(alloc.p_k), eps_t, total, spec.delta)


def quadratic_problem(spec: SgdSpec):
    rng = montecarlo.substream(spec.seed, 0xF00D)
    centers = rng.normal(0.5, 0.3, size=(spec.n, spec.d))
    opt = centers.mean(axis=0)

    def loss(theta):
        return 0.5 * float(np.mean(np.sum((centers - theta) ** 2, axis=1)))

    def grads(theta, idx):
        return theta - centers[idx]

    return loss, grads, opt


def clip_l2(G, r2: float) -> np.ndarray:
    norms = np.linalg.norm(G, axis=-1, keepdims=True)
    return G * np.minimum(1.0, r2 / np.maximum(norms, 1e-300))


def run_toy_dpsgd(spec: SgdSpec, private: bool = True):
    """Returns ``(loss trace of length T+1, privacy report)``.

    Each round samples ``k`` clients, clips their gradients to ``r2``,
    estimates the mean with the shuffled l2 mechanism and takes a step.
    ``private=False`` uses the exact mean of the clipped gradients.
    """
    privacy = dpsgd_privacy(spec)
    cfg = L2Config(spec.d, spec.k, spec.m, spec.s, privacy.v, spec.r2, spec.beta, 0, "mms")
    alloc = BudgetAllocation.noiseless(spec.m) if spec.noiseless else cfg.allocation()
    loss, grads, _ = quadratic_problem(spec)
    theta = np.zeros(spec.d)
    trace = [loss(theta)]
    for t in range(spec.T):
        rng = montecarlo.substream(spec.seed, 1, t)
        idx = rng.choice(spec.n, size=spec.k, replace=False)
        G = clip_l2(grads(theta, idx), spec.r2)
        if private:
            round_cfg = replace(cfg, rotation_seed=int(rng.integers(0, 2**63)))
            c, b, _ = l2.sample_l2(G, round_cfg, alloc, rng)
            g = l2.estimate_from_batch(c, b, round_cfg, alloc)
        else:
            g = G.mean(axis=0)
        theta = theta - spec.eta * g
        trace.append(loss(theta))
    return np.array(trace), privacy
