"""Simulated multi-message shuffling between randomizers and analyzer.

Every (level, block) pair has its own shuffler.  Messages are serialised to
the wire format, routed to their channel with the sender's identity dropped,
permuted uniformly, and handed to the analyzer.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import binary, l2, linf, wire
from .binary import BinaryConfig, MeanEstimate, MessageBundle
from .exceptions import ParameterError
from .linf import LinfBundle, LinfConfig
from .l2 import L2Config


def shuffle_channel(msgs, rng: np.random.Generator):
    """Uniform random permutation (Fisher-Yates driven by ``rng``) of a message sequence."""
    out = list(msgs)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        out[i], out[j] = out[j], out[i]
    return out


@dataclass
class TranscriptStats:
    bits_per_client: list = field(default_factory=list)
    bytes_per_client: list = field(default_factory=list)
    header_bytes: int = wire.HEADER_BYTES
    channels: int = 0
    shuffled: bool = True
    clip_counts: list = field(default_factory=list)
    client_ids: list | None = None

    @property
    def total_bytes(self) -> int:
        return int(sum(self.bytes_per_client))


def _bundles_of(client) -> list[MessageBundle]:
    return list(client.per_level) if isinstance(client, LinfBundle) else [client]


def _randomize_all(X, cfg, alloc, rng):
    X = np.asarray(X)
    clips = []
    if isinstance(cfg, BinaryConfig):
        out = [binary.randomize_binary(x, cfg.plan, cfg.p, rng) for x in X]
    elif isinstance(cfg, L2Config):
        out = []
        for x in X:
            b, c = l2.randomize_l2(x, cfg, alloc, rng, return_clips=True)
            out.append(b)
            clips.append(c)
    elif isinstance(cfg, LinfConfig):
        out = [linf.randomize_linf(x, cfg, alloc, rng) for x in X]
    else:
        raise ParameterError(f"unsupported configuration {type(cfg).__name__}")
    return out, clips


def analyze_direct(clients, cfg, alloc=None) -> np.ndarray:
    """Analyzer applied to unshuffled client outputs."""
    if isinstance(cfg, BinaryConfig):
        return binary.analyze_binary(clients, cfg.plan, cfg.p).values
    if isinstance(cfg, L2Config):
        return l2.analyze_l2(clients, cfg, alloc or cfg.allocation())
    return linf.analyze_linf(clients, cfg, alloc or cfg.allocation())


def route(wire_blobs, shuffle_rng=None):
    """Parse client payloads and collect messages per ``(level, block)`` channel.

    Sender identity is not recorded.  With ``shuffle_rng`` every channel is
    permuted independently.
    """
    chans = defaultdict(list)
    meta = {}
    for blob in wire_blobs:
        for bundle in wire.iter_bundles(blob):
            meta[bundle.level] = (bundle.plan, bundle.p)
            for j, (c, b) in enumerate(zip(bundle.coords, bundle.bits)):
                chans[(bundle.level, j)].append((int(c), int(b)))
    if shuffle_rng is not None:
        for key in sorted(chans):
            chans[key] = shuffle_channel(chans[key], shuffle_rng)
    return dict(chans), meta


def analyze_routed(chans, meta, cfg, alloc, n: int) -> np.ndarray:
    by_level = defaultdict(list)
    for (level, j) in sorted(chans):
        msgs = chans[(level, j)]
        coords = np.array([c for c, _ in msgs], dtype=np.int64)
        bits = np.array([b for _, b in msgs], dtype=np.uint8)
        by_level[level].append((j, coords, bits))
    if isinstance(cfg, BinaryConfig):
        return binary.analyze_channels(by_level[0], cfg.plan, cfg.p, n).values
    alloc = alloc or cfg.allocation()
    inner = cfg.inner if isinstance(cfg, L2Config) else cfg
    est = linf.analyze_linf_channels(dict(by_level), inner, alloc, n)
    if isinstance(cfg, L2Config):
        est = l2.unrotate(est, cfg.seed, cfg.d)
    return est


def run_pipeline(X, cfg, mode: str, rng: np.random.Generator, alloc=None, dump_dir=None):
    """Randomize every client, serialise, route, shuffle (MMS only) and analyze.

    Returns ``(MeanEstimate, TranscriptStats)``.  In LDP mode messages keep
    their client id and no shuffling happens; the estimate is the same
    function of the messages either way.
    """
    mode = linf.check_mode(mode)
    if not isinstance(cfg, BinaryConfig):
        alloc = alloc or cfg.allocation()
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ParameterError("clients must be a nonempty (n, d) array")
    n = X.shape[0]
    clients, clips = _randomize_all(X, cfg, alloc, rng)
    stats = TranscriptStats(shuffled=(mode == linf.MMS), clip_counts=clips)
    blobs = []
    for client in clients:
        parts = [wire.encode_bundle_with_size(b) for b in _bundles_of(client)]
        blob = b"".join(p[0] for p in parts)
        blobs.append(blob)
        stats.bits_per_client.append(sum(p[1] for p in parts))
        stats.bytes_per_client.append(len(blob))
    if mode == linf.MMS:
        chans, meta = route(blobs, shuffle_rng=rng)
        stats.channels = len(chans)
        if dump_dir is not None:
            wire.dump_channels(dump_dir, _channel_records(chans, meta))
        est = analyze_routed(chans, meta, cfg, alloc, n)
    else:
        stats.client_ids = list(range(n))
        received = [list(wire.iter_bundles(b)) for b in blobs]
        if isinstance(cfg, BinaryConfig):
            est = analyze_direct([r[0] for r in received], cfg)
        else:
            est = analyze_direct([LinfBundle(r) for r in received], cfg, alloc)
    return MeanEstimate(np.asarray(est), n), stats


def _channel_records(chans, meta):
    for (level, j) in sorted(chans):
        plan, p = meta[level]
        msgs = chans[(level, j)]
        yield (plan, p, level, j, [c for c, _ in msgs], [b for _, b in msgs])
