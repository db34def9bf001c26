import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmsdme import rr
from mmsdme.exceptions import DegenerateBudgetError, ParameterError


def test_identity_randomizer():
    assert rr.randomize_bit(1, 0.0, np.random.default_rng(0)).value == 1.0


def test_forced_coin_flip_branch():
    # b=0, p=0.25, coin forced to flip -> (1 - 0 - 0.25) / 0.5
    assert rr.two_rr_output(0, True, 0.25).value == pytest.approx(1.5)
    assert rr.two_rr_output(1, False, 0.25).value == pytest.approx(1.5)
    assert rr.two_rr_output(1, True, 0.25).value == pytest.approx(-0.5)


def test_unbiased_single_bit(rng):
    bits = rr.randomize_bits(np.ones(10**6, dtype=np.uint8), 0.3, rng)
    vals = rr.decode_bits(bits, 0.3)
    sigma = math.sqrt(rr.two_rr_mse(0.3) / vals.size)
    assert abs(vals.mean() - 1.0) < 3 * sigma


@pytest.mark.parametrize("b", [0, 1])
@pytest.mark.parametrize("p", [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45])
def test_unbiased_grid(rng, b, p):
    T = 10**5
    vals = rr.decode_bits(rr.randomize_bits(np.full(T, b), p, rng), p)
    assert abs(vals.mean() - b) < 4 * math.sqrt(rr.two_rr_mse(p) / T)


def test_scalar_and_vector_paths_agree():
    a = [rr.randomize_bit(1, 0.2, np.random.default_rng(7)).bit for _ in range(1)]
    b = rr.randomize_bits(np.array([1]), 0.2, np.random.default_rng(7))
    assert a[0] == b[0]


def test_support_exact(rng):
    p = 0.2
    lo, hi = -p / (1 - 2 * p), (1 - p) / (1 - 2 * p)
    vals = rr.decode_bits(rr.randomize_bits(rng.integers(0, 2, 1000), p, rng), p)
    assert set(np.unique(vals)) <= {lo, hi}
    assert rr.PrivateBit(0, p).value == lo and rr.PrivateBit(1, p).value == hi


@pytest.mark.parametrize("p,expected", [(0.0, 0.0), (0.25, 0.75), (0.4, 6.0)])
def test_two_rr_mse_values(p, expected):
    assert rr.two_rr_mse(p) == pytest.approx(expected)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.4])
def test_variance_matches(rng, p):
    vals = rr.decode_bits(rr.randomize_bits(np.zeros(10**6, dtype=np.uint8), p, rng), p)
    assert vals.var() == pytest.approx(rr.two_rr_mse(p), rel=0.05)


@pytest.mark.parametrize("p", [-0.1, 0.5, 0.7, float("nan")])
def test_invalid_flip_prob(rng, p):
    with pytest.raises(ParameterError):
        rr.randomize_bit(1, p, rng)


def test_ldp_of_flip_prob():
    assert rr.ldp_of_flip_prob(0.25) == pytest.approx(math.log(3))
    assert rr.ldp_of_flip_prob(0.1) == pytest.approx(math.log(9))
    assert rr.ldp_of_flip_prob(0.5 - 1e-9) < 1e-8
    assert rr.ldp_of_flip_prob(0.0) == rr.INFINITE_BUDGET == math.inf


def test_flip_prob_for_budget_examples():
    assert rr.flip_prob_for_budget(0) == 0.5
    assert rr.is_degenerate(rr.flip_prob_for_budget(0))
    p2 = rr.flip_prob_for_budget(2)
    assert p2 == pytest.approx(0.5 * (1 - math.sqrt(0.5)), abs=1e-12)
    assert p2 == pytest.approx(0.146447, abs=1e-6)
    assert rr.ldp_of_flip_prob(p2) == pytest.approx(1.7627, abs=1e-4)
    p1 = rr.flip_prob_for_budget(1)
    assert p1 == pytest.approx(0.276393, abs=1e-6)
    assert rr.ldp_of_flip_prob(p1) == pytest.approx(0.9624, abs=1e-4)
    assert rr.flip_prob_for_budget(math.inf) == 0.0
    with pytest.raises(ParameterError):
        rr.flip_prob_for_budget(-1)


def test_degenerate_rejected():
    with pytest.raises(DegenerateBudgetError):
        rr.require_nondegenerate(rr.flip_prob_for_budget(0.0))
    with pytest.raises(ParameterError):
        rr.randomize_bit(0, 0.5, np.random.default_rng(0))


def test_variance_identity():
    # the budget-to-p map makes the 2RR variance exactly 1/v^2
    for v in [0.1, 0.5, 1, 3, 10, 100]:
        assert rr.two_rr_mse(rr.flip_prob_for_budget(v)) == pytest.approx(1 / v**2, rel=1e-9)


def test_monotonicity():
    vs = np.linspace(0.2, 10, 50)
    ps = [rr.flip_prob_for_budget(v) for v in vs]
    assert all(a > b for a, b in zip(ps, ps[1:]))
    eps = [rr.ldp_of_flip_prob(p) for p in ps]
    assert all(a < b for a, b in zip(eps, eps[1:]))
    assert all(e <= v for e, v in zip(eps, vs))


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_budget_bound_property(v):
    p = rr.flip_prob_for_budget(v)
    assert 0 < p < 0.5
    # exact value is 2 asinh(v/2) <= v; rounding p near 1/2 costs ~4 ulp(1/2) absolute
    assert rr.ldp_of_flip_prob(p) <= v * (1 + 1e-12) + 1e-15
    assert rr.ldp_of_flip_prob(p) == pytest.approx(2 * math.asinh(v / 2), rel=1e-12, abs=1e-15)


def test_rdp_curve():
    c = rr.two_rr_rdp(0.25)
    assert c(2.0) == pytest.approx(math.log(0.25**2 / 0.75 + 0.75**2 / 0.25), rel=1e-12)
    assert c(2.0) == pytest.approx(0.8473, abs=1e-4)
    near = rr.two_rr_rdp(0.5 - 1e-12)
    assert max(near(a) for a in [1.5, 2, 8, 100]) < 1e-10
    for p in [0.05, 0.25, 0.45]:
        c = rr.two_rr_rdp(p)
        vals = [c(a) for a in [1.5, 2, 4, 16]]
        assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))
        assert vals[-1] <= rr.ldp_of_flip_prob(p)
        assert c(1e6) == pytest.approx(rr.ldp_of_flip_prob(p), rel=1e-3)


def test_rdp_domain():
    from mmsdme.rdp import RdpDomainError

    with pytest.raises(RdpDomainError):
        rr.two_rr_rdp(0.25)(1.0)
    with pytest.raises(ParameterError):
        rr.two_rr_rdp(0.0)
