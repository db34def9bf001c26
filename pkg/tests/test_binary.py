import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmsdme import binary, experiments, rr
from mmsdme.binary import BinaryConfig, MessageBundle
from mmsdme.exceptions import (DegenerateBudgetError, InputDomainError, MalformedMessageError,
                               ParameterError)


@pytest.mark.parametrize("d,s,a,padded", [(8, 2, 4, 8), (1, 1, 1, 1), (10, 3, 4, 12)])
def test_make_plan(d, s, a, padded):
    plan = binary.make_plan(d, s)
    assert (plan.a, plan.padded_d) == (a, padded)
    assert 0 <= plan.padded_d - plan.d < plan.a


@pytest.mark.parametrize("d,s", [(4, 5), (4, 0), (0, 1)])
def test_make_plan_rejects(d, s):
    with pytest.raises(ParameterError):
        binary.make_plan(d, s)


def test_noiseless_full_sampling(rng):
    plan = binary.make_plan(2, 2)
    b = np.array([1, 0])
    bundle = binary.randomize_binary(b, plan, 0.0, rng)
    assert np.array_equal(bundle.decode(), b)
    assert np.array_equal(binary.analyze_binary([bundle]).values, b)


def test_single_block_trial_shape(rng):
    plan = binary.make_plan(4, 1)
    b = np.array([1, 0, 0, 0])
    for _ in range(50):
        bd = binary.randomize_binary(b, plan, 0.0, rng)
        c = int(bd.coords[0])
        expected = np.zeros(4)
        expected[c] = 4 * b[c]
        assert np.array_equal(bd.decode(), expected)
    res = experiments.simulate(BinaryConfig(4, 1, 1, 0.0), b[None], 10**5, seed=3)
    sd = math.sqrt(4 * 1 - 1) / math.sqrt(10**5)  # Var of 4*1[coord=0] is 16/4 - 1
    assert abs(res.estimates.mean(axis=0)[0] - 1) < 4 * sd


def test_bit_count_example():
    assert binary.make_plan(8, 2).bits_per_client == 6
    assert binary.bits_per_client(8, 2) == 6
    assert binary.bits_per_client(8, 2, m=3) == 18


def test_coordinates_stay_in_blocks(rng):
    plan = binary.make_plan(10, 3)
    c, _ = binary.sample_messages(rng.integers(0, 2, (1000, 10)), plan, 0.2, rng)
    assert np.array_equal(plan.block_of(c), np.broadcast_to(np.arange(3), c.shape))
    offsets = c - plan.a * np.arange(3)
    assert set(np.unique(offsets)) == set(range(plan.a))


def test_bundle_validation():
    plan = binary.make_plan(4, 2)
    with pytest.raises(MalformedMessageError):
        MessageBundle([0], [1], plan, 0.1)
    with pytest.raises(MalformedMessageError):
        MessageBundle([2, 3], [1, 0], plan, 0.1)  # first message in block 1
    with pytest.raises(MalformedMessageError):
        MessageBundle([0, 3], [2, 0], plan, 0.1)


def test_input_validation(rng):
    plan = binary.make_plan(4, 2)
    with pytest.raises(InputDomainError):
        binary.randomize_binary([0, 2, 0, 1], plan, 0.1, rng)
    with pytest.raises(ParameterError):
        binary.randomize_binary([0, 1, 0], plan, 0.1, rng)
    with pytest.raises(ParameterError):
        binary.analyze_binary([])


def exact_client_mse(b, plan, p):
    """Enumerate every coordinate choice and every flip pattern of one client."""
    a, s = plan.a, plan.s
    bp = np.concatenate([b, np.zeros(plan.padded_d - plan.d)])
    lo, hi = rr.support(p)
    total = 0.0
    for offs in itertools.product(range(a), repeat=s):
        coords = np.array(offs) + a * np.arange(s)
        for flips in itertools.product([0, 1], repeat=s):
            prob = a**-s * np.prod([p if f else 1 - p for f in flips])
            rep = bp[coords].astype(int) ^ np.array(flips)
            y = np.zeros(plan.padded_d)
            y[coords] = a * np.where(rep == 1, hi, lo)
            total += prob * np.sum((y[: plan.d] - b) ** 2)
    return total


@pytest.mark.parametrize("d,s,p", [(4, 2, 0.25), (5, 2, 0.1), (6, 3, 0.3), (3, 1, 0.2)])
def test_client_variance_matches_enumeration(rng, d, s, p):
    plan = binary.make_plan(d, s)
    for _ in range(3):
        b = rng.integers(0, 2, d)
        assert binary.client_variance(plan, p, b.sum()) == pytest.approx(exact_client_mse(b, plan, p))


def test_identical_clients_mse_example():
    d, s, p, n = 4, 2, 0.25, 100
    X = np.ones((n, d), dtype=np.uint8)
    res = experiments.simulate(BinaryConfig(d, n, s, p), X, 10**4, seed=11)
    a = 2
    target = d * (a - 1) / n + d**2 * p * (1 - p) / (s * n * (1 - 2 * p) ** 2)
    assert res.mse == pytest.approx(target, rel=0.05)


@pytest.mark.parametrize("d,s", [(4, 1), (4, 2), (4, 4), (10, 3)])
def test_unbiased_grid(rng, d, s):
    n, T, p = 5, 10**5, 0.2
    X = rng.integers(0, 2, (n, d)).astype(np.uint8)
    cfg = BinaryConfig(d, n, s, p)
    res = experiments.simulate(cfg, X, T, seed=d * 10 + s)
    sd = math.sqrt(binary.client_variance(cfg.plan, p, d) / n / d / T)
    assert np.all(np.abs(res.estimates.mean(axis=0) - X.mean(0)) < 4.5 * sd)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.4])
def test_exact_constant_mse(rng, p):
    d, s, n = 6, 2, 20
    X = rng.integers(0, 2, (n, d)).astype(np.uint8)
    res = experiments.simulate(BinaryConfig(d, n, s, p), X, 10**5, seed=int(p * 100))
    exact = sum(binary.client_variance(binary.make_plan(d, s), p, x.sum()) for x in X) / n**2
    assert res.mse == pytest.approx(exact, rel=0.05)


def test_permutation_invariance_bitwise(rng):
    plan = binary.make_plan(10, 3)
    X = rng.integers(0, 2, (50, 10))
    bundles = [binary.randomize_binary(x, plan, 0.2, rng) for x in X]
    base = binary.analyze_binary(bundles).values
    for _ in range(5):
        perm = rng.permutation(len(bundles))
        assert np.array_equal(binary.analyze_binary([bundles[i] for i in perm]).values, base)
    # per-channel shuffling (messages of the same block from different clients)
    chans = []
    for j in range(plan.s):
        c = np.array([b.coords[j] for b in bundles])
        bt = np.array([b.bits[j] for b in bundles])
        perm = rng.permutation(len(c))
        chans.append((j, c[perm], bt[perm]))
    assert np.array_equal(binary.analyze_channels(chans[::-1], plan, 0.2, 50).values, base)


def test_full_sampling_is_per_coordinate_rr(rng):
    d = 8
    plan = binary.make_plan(d, d)
    X = rng.integers(0, 2, (200, d))
    c, bits = binary.sample_messages(X, plan, 0.3, rng)
    assert np.array_equal(c, np.broadcast_to(np.arange(d), c.shape))
    est = binary.estimate_from_batch(c, bits, plan, 0.3)
    direct = rr.decode_bits(bits, 0.3).mean(axis=0)
    assert np.allclose(est, direct, rtol=1e-12)
    # flip frequency equals p
    assert abs(np.mean(bits != X) - 0.3) < 4 * math.sqrt(0.21 / bits.size)


def test_ldp_bound_examples():
    assert binary.binary_ldp_mse_bound(4, 10, 4, 1e9) == pytest.approx(0.0, abs=1e-12)
    d, n, s, e = 4, 100, 2, 2.0
    p = rr.flip_prob_for_budget(e / s)
    V = p * (1 - p) / (1 - 2 * p) ** 2
    assert binary.binary_ldp_mse_bound(d, n, s, e) == pytest.approx(d * 1 / n + d * d * V / (s * n))
    assert binary.binary_ldp_mse_bound(d, 2 * n, s, e) == binary.binary_ldp_mse_bound(d, n, s, e) / 2
    with pytest.raises(DegenerateBudgetError):
        binary.binary_ldp_mse_bound(4, 10, 2, 0.0)


def test_ldp_bound_matches_monte_carlo():
    d, n, s, e = 4, 100, 2, 2.0
    p = rr.flip_prob_for_budget(e / s)
    res = experiments.simulate(BinaryConfig(d, n, s, p), np.ones((n, d), dtype=np.uint8), 10**5, seed=5)
    assert res.mse == pytest.approx(binary.binary_ldp_mse_bound(d, n, s, e), rel=0.03)


def test_mms_params():
    v, p = binary.binary_mms_params(1000, 1, 1.0, 1e-5)
    assert v**2 == pytest.approx(1000 / (4 * math.log(1e5)))
    assert v**2 == pytest.approx(21.71, abs=0.01)
    assert binary.eps_delta_binary(1000, 1, p, 1e-5) <= 1.0 + 1e-12
    v4, _ = binary.binary_mms_params(4000, 1, 1.0, 1e-5)
    assert v4 == pytest.approx(2 * v, rel=1e-15)
    e0 = rr.ldp_of_flip_prob(p)
    assert math.isfinite(e0) and e0 > 1.0


@settings(max_examples=50, deadline=None)
@given(n=st.integers(10, 10**7), s=st.integers(1, 64), eps=st.floats(0.01, 1.0),
       delta=st.floats(1e-12, 0.5))
def test_mms_sufficiency_property(n, s, eps, delta):
    try:
        _, p = binary.binary_mms_params(n, s, eps, delta)
    except DegenerateBudgetError:
        return
    assert binary.eps_delta_binary(n, s, p, delta) <= eps * (1 + 1e-9)


def test_mms_params_validation():
    for args in [(100, 1, 1.0, 0.0), (100, 1, 1.0, 1.0), (100, 1, 0.0, 1e-5)]:
        with pytest.raises(ParameterError):
            binary.binary_mms_params(*args)
    with pytest.raises(ParameterError):
        binary.binary_mms_params(100, 1, 2.0, 1e-5)
    with pytest.raises(DegenerateBudgetError):
        binary.binary_mms_params(1, 1, 1e-13, 1e-5, strict=True)
