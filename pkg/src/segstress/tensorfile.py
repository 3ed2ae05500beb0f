"""Portable tensor file ("SGT1") reader/writer.

Layout, all little-endian:

    magic "SGT1" | u8 dtype code | u8 ndim | ndim x u32 dims | raw payload

dtype codes: 0 = float32, 1 = uint32, 2 = uint8.  Dims are row-major in
(H, W[, C]) order.  Round-trips are bit-exact; this is the interchange
format for every patch, mask, and probability map crossing the segmenter
protocol boundary.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SGT1"

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<u4"), 2: np.dtype("<u1")}
_CODE_FOR_KIND = {"<f4": 0, "<u4": 1, "<u1": 2}

# Guard against absurd headers before allocating: dims are u32 each, but the
# element product must stay well inside addressable range.
_MAX_ELEMENTS = 2**40


class TensorFileError(ValueError):
    """Base for all tensor-file format violations."""


class BadMagicError(TensorFileError):
    pass


class DimensionOverflowError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    code = None
    for key, c in _CODE_FOR_KIND.items():
        if arr.dtype == np.dtype(key).newbyteorder("="):
            code = c
            break
    if code is None:
        raise TensorFileError(f"unsupported dtype {arr.dtype}; use f32, u32 or u8")
    if not 1 <= arr.ndim <= 255:
        raise TensorFileError(f"unsupported ndim {arr.ndim}")
    if any(d > 2**32 - 1 for d in arr.shape):
        raise DimensionOverflowError(f"dimension too large for u32: {arr.shape}")
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def load_tensor(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 6:
        raise TruncatedPayloadError(f"{path}: file shorter than fixed header")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    code, ndim = struct.unpack_from("<BB", raw, 4)
    if code not in _DTYPE_CODES:
        raise TensorFileError(f"{path}: unknown dtype code {code}")
    if ndim == 0:
        raise TensorFileError(f"{path}: ndim must be >= 1")
    dims_end = 6 + 4 * ndim
    if len(raw) < dims_end:
        raise TruncatedPayloadError(f"{path}: header truncated inside dims")
    dims = struct.unpack_from(f"<{ndim}I", raw, 6)
    n_elems = 1
    for d in dims:
        n_elems *= d
        if n_elems > _MAX_ELEMENTS:
            raise DimensionOverflowError(f"{path}: dims {dims} overflow element budget")
    dtype = _DTYPE_CODES[code]
    expected = n_elems * dtype.itemsize
    got = len(raw) - dims_end
    if got < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {got} bytes, header promises {expected}"
        )
    if got > expected:
        raise TensorFileError(f"{path}: {got - expected} trailing bytes after payload")
    arr = np.frombuffer(raw, dtype=dtype, count=n_elems, offset=dims_end)
    return arr.reshape(dims).astype(dtype.newbyteorder("="), copy=True)
