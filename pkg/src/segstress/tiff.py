"""Minimal multi-page TIFF import for microscopy exports.

Supported: grayscale (one sample per pixel), strip-organized pages, both
byte orders, uncompressed or deflate-compressed, 8/16/32-bit unsigned
integer or 32-bit float samples.  Page i becomes channel i; integer
samples are converted to float32 without rescaling.

Anything outside that matrix raises UnsupportedTiffFeatureError naming
the offending TIFF tag, so callers can tell "unsupported" from "broken".
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .types import MultiChannelImage

TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_PAGE_NAME = 285
TAG_TILE_WIDTH = 322
TAG_TILE_LENGTH = 323
TAG_TILE_OFFSETS = 324
TAG_SAMPLE_FORMAT = 339

COMPRESSION_NONE = 1
COMPRESSION_ADOBE_DEFLATE = 8
COMPRESSION_DEFLATE = 32946

_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 6: 1, 7: 1, 8: 2, 9: 4, 11: 4, 12: 8}


class TiffError(ValueError):
    """Malformed TIFF structure."""


class UnsupportedTiffFeatureError(TiffError):
    """Valid TIFF, but uses a feature outside the supported matrix."""

    def __init__(self, tag: int, detail: str):
        self.tag = tag
        super().__init__(f"unsupported TIFF feature (tag {tag}): {detail}")


class _Entry:
    __slots__ = ("tag", "ftype", "count", "raw")

    def __init__(self, tag, ftype, count, raw):
        self.tag = tag
        self.ftype = ftype
        self.count = count
        self.raw = raw


def _read_values(entry: _Entry, data: bytes, bo: str) -> list[int]:
    size = _TYPE_SIZES.get(entry.ftype)
    if size is None:
        raise TiffError(f"tag {entry.tag}: unknown field type {entry.ftype}")
    total = size * entry.count
    if total <= 4:
        payload = entry.raw[:total]
    else:
        (offset,) = struct.unpack(bo + "I", entry.raw)
        if offset + total > len(data):
            raise TiffError(f"tag {entry.tag}: value offset beyond end of file")
        payload = data[offset : offset + total]
    fmt = {1: "B", 3: "H", 4: "I"}.get(entry.ftype)
    if fmt is None:
        raise TiffError(f"tag {entry.tag}: field type {entry.ftype} not handled")
    return list(struct.unpack(bo + fmt * entry.count, payload))


def _read_ascii(entry: _Entry, data: bytes, bo: str) -> str:
    if entry.count <= 4:
        payload = entry.raw[: entry.count]
    else:
        (offset,) = struct.unpack(bo + "I", entry.raw)
        payload = data[offset : offset + entry.count]
    return payload.split(b"\0")[0].decode("ascii", errors="replace")


def _decode_page(tags: dict[int, _Entry], data: bytes, bo: str) -> tuple[np.ndarray, str | None]:
    def tag_values(tag, default=None):
        if tag not in tags:
            if default is not None:
                return default
            raise TiffError(f"required tag {tag} missing")
        return _read_values(tags[tag], data, bo)

    for tile_tag in (TAG_TILE_WIDTH, TAG_TILE_LENGTH, TAG_TILE_OFFSETS):
        if tile_tag in tags:
            raise UnsupportedTiffFeatureError(tile_tag, "tiled organization")

    width = tag_values(TAG_IMAGE_WIDTH)[0]
    height = tag_values(TAG_IMAGE_LENGTH)[0]
    spp = tag_values(TAG_SAMPLES_PER_PIXEL, [1])[0]
    if spp != 1:
        raise UnsupportedTiffFeatureError(
            TAG_SAMPLES_PER_PIXEL, f"{spp} samples per pixel; only grayscale pages"
        )
    photometric = tag_values(TAG_PHOTOMETRIC, [1])[0]
    if photometric not in (0, 1):
        raise UnsupportedTiffFeatureError(
            TAG_PHOTOMETRIC, f"photometric {photometric}; only grayscale"
        )
    compression = tag_values(TAG_COMPRESSION, [COMPRESSION_NONE])[0]
    if compression not in (COMPRESSION_NONE, COMPRESSION_ADOBE_DEFLATE, COMPRESSION_DEFLATE):
        raise UnsupportedTiffFeatureError(
            TAG_COMPRESSION, f"compression {compression}; only none or deflate"
        )
    bits = tag_values(TAG_BITS_PER_SAMPLE, [1])[0]
    sample_format = tag_values(TAG_SAMPLE_FORMAT, [1])[0]
    if sample_format == 1:
        dtype = {8: "u1", 16: "u2", 32: "u4"}.get(bits)
        if dtype is None:
            raise UnsupportedTiffFeatureError(
                TAG_BITS_PER_SAMPLE, f"{bits}-bit integer samples"
            )
    elif sample_format == 3:
        if bits != 32:
            raise UnsupportedTiffFeatureError(
                TAG_BITS_PER_SAMPLE, f"{bits}-bit float samples; only 32"
            )
        dtype = "f4"
    else:
        raise UnsupportedTiffFeatureError(
            TAG_SAMPLE_FORMAT, f"sample format {sample_format}; only uint or float"
        )

    offsets = tag_values(TAG_STRIP_OFFSETS)
    byte_counts = tag_values(TAG_STRIP_BYTE_COUNTS)
    if len(offsets) != len(byte_counts):
        raise TiffError("strip offsets and byte counts disagree")
    raw = bytearray()
    for off, cnt in zip(offsets, byte_counts):
        if off + cnt > len(data):
            raise TiffError("strip extends beyond end of file")
        chunk = data[off : off + cnt]
        if compression != COMPRESSION_NONE:
            try:
                chunk = zlib.decompress(chunk)
            except zlib.error as exc:
                raise TiffError(f"bad deflate strip: {exc}") from exc
        raw += chunk

    expected = width * height * np.dtype(dtype).itemsize
    if len(raw) < expected:
        raise TiffError(f"page payload holds {len(raw)} bytes, needs {expected}")
    arr = np.frombuffer(bytes(raw[:expected]), dtype=np.dtype(dtype).newbyteorder(bo))
    page = arr.reshape(height, width).astype(np.float32)

    name = None
    if TAG_PAGE_NAME in tags:
        name = _read_ascii(tags[TAG_PAGE_NAME], data, bo)
    return page, name


def load_tiff(path: str | Path) -> MultiChannelImage:
    """Load a multi-page grayscale TIFF; page i becomes channel i."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise TiffError("file shorter than TIFF header")
    if data[:2] == b"II":
        bo = "<"
    elif data[:2] == b"MM":
        bo = ">"
    else:
        raise TiffError(f"not a TIFF: byte order mark {data[:2]!r}")
    (magic,) = struct.unpack_from(bo + "H", data, 2)
    if magic != 42:
        raise TiffError(f"not a TIFF: magic {magic} != 42")
    (ifd_offset,) = struct.unpack_from(bo + "I", data, 4)

    pages = []
    names = []
    seen = set()
    while ifd_offset != 0:
        if ifd_offset in seen:
            raise TiffError("IFD loop")
        seen.add(ifd_offset)
        if ifd_offset + 2 > len(data):
            raise TiffError("IFD offset beyond end of file")
        (n_entries,) = struct.unpack_from(bo + "H", data, ifd_offset)
        end = ifd_offset + 2 + 12 * n_entries
        if end + 4 > len(data):
            raise TiffError("IFD truncated")
        tags = {}
        for i in range(n_entries):
            base = ifd_offset + 2 + 12 * i
            tag, ftype, count = struct.unpack_from(bo + "HHI", data, base)
            tags[tag] = _Entry(tag, ftype, count, data[base + 8 : base + 12])
        page, name = _decode_page(tags, data, bo)
        pages.append(page)
        names.append(name)
        (ifd_offset,) = struct.unpack_from(bo + "I", data, end)

    if not pages:
        raise TiffError("TIFF contains no pages")
    shapes = {p.shape for p in pages}
    if len(shapes) != 1:
        raise TiffError(f"pages disagree on dimensions: {sorted(shapes)}")
    stack = np.stack(pages, axis=-1)
    channel_names = tuple(
        n if n else f"ch{i}" for i, n in enumerate(names)
    )
    return MultiChannelImage(pixels=stack, channel_names=channel_names)
