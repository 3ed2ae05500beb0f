"""Shared raster and record types. No algorithms live here.

All types are immutable value objects: the wrapped numpy arrays are made
read-only at construction time, so instances can be shared freely across
threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

K_POOL = (0, 3, 5, 7, 9)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MultiChannelImage:
    """Float intensity raster of shape (H, W, C) with per-channel biomarker names."""

    pixels: np.ndarray
    channel_names: tuple[str, ...]
    resolution_um: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3:
            raise ValueError(f"image pixels must be (H, W, C), got shape {px.shape}")
        if len(self.channel_names) != px.shape[2]:
            raise ValueError(
                f"{len(self.channel_names)} channel names for {px.shape[2]} channels"
            )
        if not np.all(np.isfinite(px)):
            raise ValueError("image intensities must be finite")
        if px.size and px.min() < 0:
            raise ValueError("image intensities must be >= 0")
        object.__setattr__(self, "pixels", _freeze(px))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class InstanceMask:
    """Per-pixel cell identity: 0 is background, each positive label is one cell.

    Positive labels need not be contiguous (erasure leaves gaps).
    """

    labels: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.labels)
        if lb.ndim != 2:
            raise ValueError(f"mask labels must be (H, W), got shape {lb.shape}")
        if lb.dtype != np.uint32:
            if lb.size and (lb.min() < 0 or lb.max() > np.iinfo(np.uint32).max):
                raise ValueError("labels out of uint32 range")
            lb = lb.astype(np.uint32)
        object.__setattr__(self, "labels", _freeze(lb))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def cell_ids(self) -> np.ndarray:
        """Sorted ascending unique positive labels."""
        ids = np.unique(self.labels)
        return ids[ids > 0]

    @property
    def num_cells(self) -> int:
        return int(self.cell_ids().size)


@dataclass(frozen=True)
class BinaryMask:
    """Foreground bit per pixel, {0, 1}."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError(f"mask bits must be (H, W), got shape {b.shape}")
        b = (b != 0).astype(np.uint8)
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class ProbabilityMask:
    """Foreground probability per pixel, in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"mask values must be (H, W), got shape {v.shape}")
        if v.size and (not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1):
            raise ValueError("probabilities must be finite and in [0, 1]")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CorruptionSpec:
    """Fully determines one corruption: erase `missing_fraction` of cells, then
    erode/dilate each with kernels drawn from {k in K_POOL : k <= k_max}."""

    missing_fraction: float
    k_max: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.missing_fraction <= 1.0:
            raise ValueError(f"missing_fraction {self.missing_fraction} not in [0, 1]")
        if self.k_max not in K_POOL:
            raise ValueError(f"k_max {self.k_max} not in {K_POOL}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MetricsReport:
    """Pixel confusion counts plus the five derived overlap metrics."""

    tp: int
    fp: int
    fn: int
    tn: int
    dsc: float
    jaccard: float
    precision: float
    recall: float
    specificity: float

    def counts(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fp, self.fn, self.tn)

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "dsc": self.dsc,
            "jaccard": self.jaccard,
            "precision": self.precision,
            "recall": self.recall,
            "specificity": self.specificity,
        }


METRIC_NAMES = ("dsc", "jaccard", "precision", "recall", "specificity")


@dataclass(frozen=True)
class TransferDelta:
    """Single-tissue minus multi-tissue score for one metric."""

    metric_name: str
    m_single_tissue: float
    m_multi_tissue: float
    delta: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        expected = self.m_single_tissue - self.m_multi_tissue
        if self.delta is None:
            object.__setattr__(self, "delta", expected)
        elif self.delta != expected:
            raise ValueError(f"delta {self.delta} != m_single - m_multi = {expected}")


def binarize(mask: InstanceMask) -> BinaryMask:
    """Foreground bit = 1 wherever the instance label is positive."""
    return BinaryMask(bits=(mask.labels > 0))
