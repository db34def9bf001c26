import numpy as np
import pytest
from sklearn.base import clone

from mmsdme import l2
from mmsdme import BinaryMeanEstimator, L2MeanEstimator, LinfMeanEstimator
from mmsdme.exceptions import InputDomainError


def test_params_and_clone():
    est = L2MeanEstimator(s=2, m=3, epsilon=2.0, beta=0.05, random_state=0)
    params = est.get_params()
    assert params["beta"] == 0.05 and params["m"] == 3 and params["mode"] == "ldp"
    twin = clone(est).set_params(m=4)
    assert twin.m == 4 and est.m == 3


def test_binary_fit_transform(rng):
    X = rng.integers(0, 2, (400, 6))
    est = BinaryMeanEstimator(s=3, epsilon=6.0, random_state=1).fit(X)
    assert est.mean_.shape == (6,) and est.bits_per_client_ == 3 * 2
    R = est.transform(X)
    assert R.shape == X.shape
    assert np.allclose(R.mean(axis=0), X.mean(axis=0), atol=0.35)
    with pytest.raises(InputDomainError):
        est.fit(X * 2)


def test_reproducible(rng):
    X = rng.uniform(-1, 1, (50, 4))
    a = LinfMeanEstimator(s=2, m=2, epsilon=3.0, random_state=7).fit(X).mean_
    b = LinfMeanEstimator(s=2, m=2, epsilon=3.0, random_state=7).fit(X).mean_
    assert np.array_equal(a, b)


def test_linf_unbiased_over_repeats(rng):
    X = rng.uniform(-1, 1, (20, 3))
    means = [LinfMeanEstimator(s=3, m=3, epsilon=4.0, random_state=i).fit(X).mean_ for i in range(3000)]
    err = np.mean(means, axis=0) - X.mean(axis=0)
    sd = np.std(means, axis=0) / np.sqrt(3000)
    assert np.all(np.abs(err) < 4 * sd)


def test_l2_fit(rng):
    X = rng.normal(size=(200, 5))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    est = L2MeanEstimator(s=8, m=6, epsilon=50.0, random_state=0).fit(X)
    assert est.mean_.shape == (5,) and est.clip_counts_.shape == (200,)
    errs = [np.sum((clone(est).set_params(random_state=i).fit(X).mean_ - X.mean(axis=0)) ** 2)
            for i in range(300)]
    assert np.mean(errs) <= l2.l2_worst_case_mse(est.config_)
    with pytest.raises(ValueError):
        est.transform(X[:, :4])


def test_certify_mms():
    X = np.zeros((1000, 4))
    est = LinfMeanEstimator(s=2, m=2, epsilon=1.0, mode="mms", random_state=0).fit(X)
    rep = est.certify(variant="feldman")
    assert rep.target == 1.0 and rep.achieved < np.inf


def test_unfitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        LinfMeanEstimator().transform(np.zeros((2, 2)))
