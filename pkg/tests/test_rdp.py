import math

import numpy as np
import pytest

from mmsdme import rr
from mmsdme.exceptions import AmplificationRangeError, ParameterError
from mmsdme.rdp import RdpDomainError, alpha_grid, compose, linear_curve, rdp_to_dp, zero_curve


def test_compose_single_and_identical():
    c = rr.two_rr_rdp(0.2)
    a = np.array([1.5, 2.0, 10.0])
    assert np.array_equal(compose([c])(a), c(a))
    assert np.allclose(compose([c] * 5)(a), 5 * c(a), rtol=1e-15)
    assert np.allclose(c.scale(5)(a), compose([c] * 5)(a), rtol=1e-15)


def test_compose_caps_and_empty():
    c = compose([linear_curve(0.1, cap=10), linear_curve(0.2, cap=4)])
    assert c.cap == 4
    assert c(2.0) == pytest.approx(0.6)
    with pytest.raises(RdpDomainError):
        c(5.0)
    with pytest.raises(ParameterError):
        compose([])


def test_zero_curve_clamped():
    g = rdp_to_dp(zero_curve(), 1e-5)
    assert g.epsilon >= 0
    assert g.epsilon < 1e-3


def test_linear_closed_form():
    rho, delta = 0.01, 1e-5
    g = rdp_to_dp(linear_curve(rho), delta)
    assert g.epsilon <= rho + 2 * math.sqrt(rho * math.log(1 / delta))
    # never worse than the completed-square bound 2 sqrt(rho log(1/delta))
    assert g.epsilon <= 2 * math.sqrt(rho * math.log(1 / delta)) + 1e-12
    # refined optimum is within 1e-4 of a dense brute-force minimum
    a = 1 + np.geomspace(1e-4, 1e4, 200_000)
    dense = np.min(rho * a + math.log(1 / delta) / (a - 1) + np.log1p(-1 / a))
    assert abs(g.epsilon - dense) < 1e-4


def test_conversion_monotone():
    c = linear_curve(0.02)
    eps = [rdp_to_dp(c, d).epsilon for d in (1e-8, 1e-6, 1e-4, 1e-2)]
    assert all(x >= y for x, y in zip(eps, eps[1:]))
    assert rdp_to_dp(linear_curve(0.03), 1e-5).epsilon >= rdp_to_dp(c, 1e-5).epsilon


def test_insufficient_range():
    with pytest.raises(AmplificationRangeError):
        rdp_to_dp(linear_curve(0.1, cap=1.001), 1e-5)
    with pytest.raises(AmplificationRangeError):
        alpha_grid(0.5)


def test_grid_documented():
    g = alpha_grid()
    assert len(g) == 256 and g[0] == pytest.approx(1 + 2**-8) and g[-1] == pytest.approx(2**14)
    assert "256" in rdp_to_dp(linear_curve(0.01), 1e-5).grid


def test_bad_delta():
    with pytest.raises(ParameterError):
        rdp_to_dp(linear_curve(0.01), 1.0)
