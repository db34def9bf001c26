"""scikit-learn style wrappers around the mean-estimation mechanisms.

``fit(X)`` runs the full client/server protocol on the rows of ``X`` and
stores the private mean in ``mean_``.  ``transform(X)`` returns each row's
own unbiased (decoded) report, so ``transform(X).mean(axis=0)`` is an
alternative estimate of the mean.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from . import accountant, binary, l2, linf, rr
from .binary import BinaryConfig
from .exceptions import InputDomainError
from .l2 import L2Config
from .linf import LinfConfig


def _generator(random_state) -> np.random.Generator:
    rs = check_random_state(random_state)
    return np.random.default_rng(rs.randint(0, 2**32 - 1, size=4, dtype=np.uint64))


class _MeanEstimatorBase(TransformerMixin, BaseEstimator):
    def _budget(self, n: int, s: int) -> float:
        if self.mode == "ldp":
            return self.epsilon
        return linf.mms_budget_for_linf(n, s, self.epsilon, self.delta, strict=False)

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        self.config_ = self._make_config(X.shape[0], X.shape[1])
        rng = _generator(self.random_state)
        reports = self._reports(X, rng)
        self.mean_ = reports.mean(axis=0)
        self.bits_per_client_ = self.config_.bits_per_client
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = self._validate(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self._reports(X, _generator(self.random_state))

    def certify(self, target=None, variant=accountant.GIRGIS):
        """Privacy certificate of the fitted configuration (see :func:`accountant.certify`)."""
        check_is_fitted(self, "config_")
        target = self.epsilon if target is None else target
        return accountant.certify(self.config_, self.mode, target, self.delta, variant,
                                  raise_on_failure=False)


class BinaryMeanEstimator(_MeanEstimatorBase):
    """Mean of binary vectors with ``s`` one-bit 2RR messages per client.

    ``epsilon`` is the local budget ``eps0`` (``mode='ldp'``) or the central
    target (``mode='mms'``, with ``delta``).
    """

    def __init__(self, s=1, epsilon=1.0, mode="ldp", delta=1e-5, random_state=None):
        self.s = s
        self.epsilon = epsilon
        self.mode = mode
        self.delta = delta
        self.random_state = random_state

    def _validate(self, X):
        X = check_array(X, dtype=None)
        if not np.all((X == 0) | (X == 1)):
            raise InputDomainError("BinaryMeanEstimator expects 0/1 entries")
        return X.astype(np.uint8)

    def _make_config(self, n, d):
        if self.mode == "ldp":
            p = rr.flip_prob_for_budget(self.epsilon / self.s)
        else:
            _, p = binary.binary_mms_params(n, self.s, self.epsilon, self.delta, strict=False)
        self.p_ = rr.require_nondegenerate(p)
        return BinaryConfig(d, n, self.s, self.p_, self.mode)

    def _reports(self, X, rng):
        plan, p = self.config_.plan, self.config_.p
        coords, bits = binary.sample_messages(X, plan, p, rng)
        return binary.estimate_from_batch(coords[:, None], bits[:, None], plan, p)


class LinfMeanEstimator(_MeanEstimatorBase):
    """Mean of vectors in the l-infinity ball of radius ``radius`` with ``m`` quantization levels."""

    def __init__(self, s=1, m=1, epsilon=1.0, radius=1.0, mode="ldp", delta=1e-5, random_state=None):
        self.s = s
        self.m = m
        self.epsilon = epsilon
        self.radius = radius
        self.mode = mode
        self.delta = delta
        self.random_state = random_state

    def _validate(self, X):
        return check_array(X, dtype=np.float64)

    def _make_config(self, n, d):
        cfg = LinfConfig(d, n, self.m, self.s, self._budget(n, self.s), self.radius, self.mode)
        self.alloc_ = cfg.allocation()
        return cfg

    def _reports(self, X, rng):
        coords, bits = linf.sample_linf(X, self.config_, self.alloc_, rng)
        return linf.estimate_from_batch(coords[:, None], bits[:, None], self.config_, self.alloc_)


class L2MeanEstimator(LinfMeanEstimator):
    """Mean of vectors in the l2 ball of radius ``radius`` via randomized Hadamard rotation."""

    def __init__(self, s=1, m=1, epsilon=1.0, radius=1.0, beta=0.01, rotation_seed=0, mode="ldp",
                 delta=1e-5, random_state=None):
        super().__init__(s=s, m=m, epsilon=epsilon, radius=radius, mode=mode, delta=delta,
                         random_state=random_state)
        self.beta = beta
        self.rotation_seed = rotation_seed

    def _make_config(self, n, d):
        cfg = L2Config(d, n, self.m, self.s, self._budget(n, self.s), self.radius, self.beta,
                       self.rotation_seed, self.mode)
        self.alloc_ = cfg.allocation()
        return cfg

    def _reports(self, X, rng):
        coords, bits, self.clip_counts_ = l2.sample_l2(X, self.config_, self.alloc_, rng)
        return l2.estimate_from_batch(coords[:, None], bits[:, None], self.config_, self.alloc_)
