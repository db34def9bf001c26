"""Bit-exact wire format for client bundles and shuffled channels.

Client bundle (all integers little-endian)::

    u16 d | u16 s | u8 level | f64 p | s records, MSB-first bit stream

Each record is ``ceil(log2 a)`` bits of coordinate offset inside its block
followed by one value bit; the stream is zero-padded to a byte boundary.
The header is a fixed 13 bytes and is not counted as payload.

Channel file (one shuffler's output)::

    u16 d | u16 s | u8 level | f64 p | u16 block | u32 count | count records
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .binary import MessageBundle, SamplingPlan, make_plan
from .exceptions import MalformedMessageError, ParameterError

BUNDLE_HEADER = struct.Struct("<HHBd")
CHANNEL_HEADER = struct.Struct("<HHBdHI")
HEADER_BYTES = BUNDLE_HEADER.size


class _BitWriter:
    def __init__(self):
        self.acc = 0
        self.nbits = 0

    def write(self, value: int, width: int):
        if width == 0:
            return
        if value < 0 or value >> width:
            raise ParameterError(f"value {value} does not fit in {width} bits")
        self.acc = (self.acc << width) | value
        self.nbits += width

    def to_bytes(self) -> bytes:
        nbytes = -(-self.nbits // 8)
        return (self.acc << (8 * nbytes - self.nbits)).to_bytes(nbytes, "big") if nbytes else b""


class _BitReader:
    def __init__(self, data: bytes, nbits: int):
        if len(data) * 8 < nbits:
            raise MalformedMessageError("truncated record stream")
        self.value = int.from_bytes(data, "big")
        self.left = len(data) * 8
        self.read_bits = 0

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        self.left -= width
        self.read_bits += width
        return (self.value >> self.left) & ((1 << width) - 1)


def _check_header_fields(plan: SamplingPlan, level: int):
    if plan.d > 0xFFFF or plan.s > 0xFFFF:
        raise ParameterError("d and s must fit in 16 bits for the wire format")
    if not 0 <= level <= 0xFF:
        raise ParameterError("level id must fit in one byte")


def encode_records(offsets, bits, coord_bits: int) -> tuple[bytes, int]:
    w = _BitWriter()
    for off, b in zip(offsets, bits):
        w.write(int(off), coord_bits)
        w.write(int(b), 1)
    return w.to_bytes(), w.nbits


def decode_records(data: bytes, count: int, coord_bits: int) -> tuple[np.ndarray, np.ndarray]:
    nbits = count * (coord_bits + 1)
    r = _BitReader(data[: -(-nbits // 8)], nbits)
    offs = np.empty(count, dtype=np.int64)
    bits = np.empty(count, dtype=np.uint8)
    for i in range(count):
        offs[i] = r.read(coord_bits)
        bits[i] = r.read(1)
    return offs, bits


def encode_bundle_with_size(bundle: MessageBundle) -> tuple[bytes, int]:
    """Serialise a bundle; also return the payload bit count actually written."""
    plan = bundle.plan
    _check_header_fields(plan, bundle.level)
    header = BUNDLE_HEADER.pack(plan.d, plan.s, bundle.level, bundle.p)
    offsets = bundle.coords - plan.a * np.arange(plan.s)
    body, nbits = encode_records(offsets, bundle.bits, plan.coord_bits)
    return header + body, nbits


def encode_bundle(bundle: MessageBundle) -> bytes:
    return encode_bundle_with_size(bundle)[0]


def bundle_size(plan: SamplingPlan) -> int:
    return HEADER_BYTES + -(-plan.bits_per_client // 8)


def decode_bundle(data: bytes, offset: int = 0) -> tuple[MessageBundle, int]:
    """Parse one bundle starting at ``offset``; returns it and the next offset."""
    if len(data) - offset < HEADER_BYTES:
        raise MalformedMessageError("truncated bundle header")
    d, s, level, p = BUNDLE_HEADER.unpack_from(data, offset)
    try:
        plan = make_plan(d, s)
    except ParameterError as exc:
        raise MalformedMessageError(f"invalid header: {exc}") from exc
    end = offset + bundle_size(plan)
    if end > len(data):
        raise MalformedMessageError("truncated bundle payload")
    offs, bits = decode_records(data[offset + HEADER_BYTES:end], s, plan.coord_bits)
    if np.any(offs >= plan.a):
        raise MalformedMessageError("coordinate offset exceeds block size")
    coords = offs + plan.a * np.arange(s)
    return MessageBundle(coords, bits, plan, p, level), end


def encode_bundles(bundles) -> bytes:
    return b"".join(encode_bundle(b) for b in bundles)


def iter_bundles(data: bytes) -> Iterator[MessageBundle]:
    pos = 0
    while pos < len(data):
        bundle, pos = decode_bundle(data, pos)
        yield bundle


def decode_bundles(data: bytes) -> list[MessageBundle]:
    return list(iter_bundles(data))


def encode_channel(plan: SamplingPlan, p: float, level: int, block: int, coords, bits) -> bytes:
    _check_header_fields(plan, level)
    coords = np.asarray(coords, dtype=np.int64)
    offsets = coords - plan.a * block
    if np.any((offsets < 0) | (offsets >= plan.a)):
        raise MalformedMessageError(f"message outside block {block}")
    header = CHANNEL_HEADER.pack(plan.d, plan.s, level, p, block, len(coords))
    body, _ = encode_records(offsets, bits, plan.coord_bits)
    return header + body


def decode_channel(data: bytes):
    """Returns ``(plan, p, level, block, coords, bits)``."""
    if len(data) < CHANNEL_HEADER.size:
        raise MalformedMessageError("truncated channel header")
    d, s, level, p, block, count = CHANNEL_HEADER.unpack_from(data, 0)
    plan = make_plan(d, s)
    offs, bits = decode_records(data[CHANNEL_HEADER.size:], count, plan.coord_bits)
    return plan, p, level, block, offs + plan.a * block, bits


def dump_channels(directory, channels) -> Path:
    """Write one file per channel plus ``index.json``.

    ``channels`` yields ``(plan, p, level, block, coords, bits)``.  The index
    maps ``"level:block"`` to the file name, byte offset (always 0) and length.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = {}
    for plan, p, level, block, coords, bits in channels:
        blob = encode_channel(plan, p, level, block, coords, bits)
        name = f"channel_L{level:03d}_B{block:05d}.bin"
        (directory / name).write_bytes(blob)
        index[f"{level}:{block}"] = {"file": name, "offset": 0, "length": len(blob)}
    path = directory / "index.json"
    path.write_text(json.dumps(index, indent=2, sort_keys=True))
    return path


def load_channels(directory):
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    out = []
    for key in sorted(index, key=lambda k: tuple(int(x) for x in k.split(":"))):
        entry = index[key]
        blob = (directory / entry["file"]).read_bytes()
        out.append(decode_channel(blob[entry["offset"]: entry["offset"] + entry["length"]]))
    return out
