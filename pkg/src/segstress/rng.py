"""Deterministic random streams.

Every stochastic operation in the workbench draws from a Philox4x64-10
counter-based generator whose 128-bit key is the first 16 bytes of
SHA-256 over the canonical encoding of a key tuple (ints as 8-byte
little-endian, strings as UTF-8 preceded by a length byte tag).  Streams
keyed by different tuples are independent, so per-cell / per-stage
randomness does not depend on iteration or scheduling order.

This scheme is part of the reproducibility contract: exact erased cell
sets and train shuffles must not drift between releases.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np


def _encode(parts: tuple) -> bytes:
    out = bytearray()
    for p in parts:
        if isinstance(p, (bool, np.bool_)):
            out += b"b" + bytes([int(p)])
        elif isinstance(p, (int, np.integer)):
            out += b"i" + struct.pack("<Q", int(p) & (2**64 - 1))
        elif isinstance(p, (float, np.floating)):
            out += b"f" + struct.pack("<d", float(p))
        elif isinstance(p, str):
            raw = p.encode("utf-8")
            out += b"s" + struct.pack("<I", len(raw)) + raw
        else:
            raise TypeError(f"cannot key a stream with {type(p).__name__}")
    return bytes(out)


def stream(*parts) -> np.random.Generator:
    """Independent Philox stream keyed by the given tuple."""
    digest = hashlib.sha256(_encode(parts)).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(*parts) -> int:
    """64-bit seed derived from a tuple, e.g. (master_seed, stage, parameter)."""
    digest = hashlib.sha256(_encode(parts)).digest()
    return int.from_bytes(digest[:8], "little")


def fisher_yates(items: list, rng: np.random.Generator) -> list:
    """Plain Fisher-Yates shuffle; the draw sequence (one uniform integer per
    position, back to front) is fixed by contract."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        out[i], out[j] = out[j], out[i]
    return out
