import itertools
import json
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from mmsdme import shuffle, wire
from mmsdme.binary import BinaryConfig
from mmsdme.l2 import L2Config
from mmsdme.linf import LinfConfig


def test_trivial_shuffles(rng):
    assert shuffle.shuffle_channel([], rng) == []
    assert shuffle.shuffle_channel([(3, 1)], rng) == [(3, 1)]


def test_uniform_permutations():
    rng = np.random.default_rng(123)
    counts = Counter(tuple(shuffle.shuffle_channel(range(5), rng)) for _ in range(10**5))
    assert len(counts) == 120
    obs = [counts[p] for p in itertools.permutations(range(5))]
    assert chisquare(obs).pvalue > 1e-3


def test_multiset_preserved(rng):
    msgs = [(int(c), int(b)) for c, b in zip(rng.integers(0, 9, 200), rng.integers(0, 2, 200))]
    assert Counter(shuffle.shuffle_channel(msgs, rng)) == Counter(msgs)


CONFIGS = [
    BinaryConfig(10, 3, 3, 0.2, "mms"),
    LinfConfig(6, 3, 3, 2, 4.0, 1.0, "mms"),
    L2Config(6, 3, 2, 4, 4.0, 1.0, mode="mms"),
]


def inputs(cfg, rng):
    if isinstance(cfg, BinaryConfig):
        return rng.integers(0, 2, (cfg.n, cfg.d)).astype(np.uint8)
    X = rng.uniform(-1, 1, (cfg.n, cfg.d))
    if isinstance(cfg, L2Config):
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


@pytest.mark.parametrize("cfg", CONFIGS, ids=["binary", "linf", "l2"])
def test_pipeline_equals_direct_bitwise(cfg):
    X = inputs(cfg, np.random.default_rng(1))
    est, stats = shuffle.run_pipeline(X, cfg, "mms", np.random.default_rng(2))
    alloc = None if isinstance(cfg, BinaryConfig) else cfg.allocation()
    clients, _ = shuffle._randomize_all(X, cfg, alloc, np.random.default_rng(2))
    assert np.array_equal(est.values, shuffle.analyze_direct(clients, cfg, alloc))
    assert stats.shuffled and stats.client_ids is None
    assert all(b == cfg.bits_per_client for b in stats.bits_per_client)
    assert stats.channels == cfg.m * cfg.s


@pytest.mark.parametrize("cfg", CONFIGS, ids=["binary", "linf", "l2"])
def test_ldp_mode_same_estimate(cfg):
    X = inputs(cfg, np.random.default_rng(1))
    mms, _ = shuffle.run_pipeline(X, cfg, "mms", np.random.default_rng(5))
    ldp, stats = shuffle.run_pipeline(X, cfg, "ldp", np.random.default_rng(5))
    assert np.array_equal(mms.values, ldp.values)
    assert not stats.shuffled and stats.client_ids == [0, 1, 2]


def test_route_strips_identity_and_shuffles(rng):
    cfg = BinaryConfig(8, 50, 2, 0.0)
    X = np.zeros((50, 8), dtype=np.uint8)
    X[:, 0] = 1
    blobs = [wire.encode_bundle(shuffle.binary.randomize_binary(x, cfg.plan, 0.0, rng)) for x in X]
    plain, _ = shuffle.route(blobs)
    mixed, meta = shuffle.route(blobs, shuffle_rng=np.random.default_rng(0))
    assert set(mixed) == {(0, 0), (0, 1)} and meta[0] == (cfg.plan, 0.0)
    for key in plain:
        assert Counter(plain[key]) == Counter(mixed[key])
        assert all(len(m) == 2 for m in mixed[key])  # (coord, bit) only
    assert plain[(0, 0)] != mixed[(0, 0)]


def test_transcript_dump(tmp_path):
    cfg = LinfConfig(6, 4, 2, 3, 4.0, 1.0, "mms")
    X = inputs(cfg, np.random.default_rng(3))
    est, _ = shuffle.run_pipeline(X, cfg, "mms", np.random.default_rng(4), dump_dir=tmp_path)
    index = json.loads((tmp_path / "index.json").read_text())
    assert sorted(index) == [f"{k}:{j}" for k in (1, 2) for j in range(3)]
    loaded = wire.load_channels(tmp_path)
    assert all(len(ch[4]) == 4 for ch in loaded)
    chans = {(lvl, blk): list(zip(c.tolist(), b.tolist())) for _, _, lvl, blk, c, b in loaded}
    meta = {lvl: (pl, p) for pl, p, lvl, _, _, _ in loaded}
    assert np.array_equal(shuffle.analyze_routed(chans, meta, cfg, None, 4), est.values)


def test_bad_inputs(rng):
    with pytest.raises(ValueError):
        shuffle.run_pipeline(np.zeros(3), LinfConfig(3, 1, 1, 1, 1.0, 1.0), "mms", rng)
    with pytest.raises(ValueError):
        shuffle.run_pipeline(np.zeros((1, 3)), LinfConfig(3, 1, 1, 1, 1.0, 1.0), "central", rng)
