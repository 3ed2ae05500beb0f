"""Non-overlapping tiling into square patches and its exact inverse.

Padding (zero / background) goes on the right and bottom only, so patch
(0, 0) stays anchored at the image origin and reconstruction is a crop.
Patch order is row-major; that order is canonical for the segmenter
protocol manifests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import BinaryMask, InstanceMask, MultiChannelImage, ProbabilityMask

DEFAULT_PATCH = 128


@dataclass(frozen=True)
class PatchGrid:
    orig_w: int
    orig_h: int
    patch: int
    pad_right: int
    pad_bottom: int
    rows: int
    cols: int

    def __post_init__(self):
        if self.orig_w + self.pad_right != self.cols * self.patch:
            raise ValueError("width + pad_right must equal cols * patch")
        if self.orig_h + self.pad_bottom != self.rows * self.patch:
            raise ValueError("height + pad_bottom must equal rows * patch")
        if not (0 <= self.pad_right < self.patch and 0 <= self.pad_bottom < self.patch):
            raise ValueError("padding must be in [0, patch)")

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols


def plan_grid(w: int, h: int, patch: int = DEFAULT_PATCH) -> PatchGrid:
    if w < 1 or h < 1 or patch < 1:
        raise ValueError("width, height and patch size must all be >= 1")
    cols = -(-w // patch)
    rows = -(-h // patch)
    return PatchGrid(
        orig_w=w,
        orig_h=h,
        patch=patch,
        pad_right=cols * patch - w,
        pad_bottom=rows * patch - h,
        rows=rows,
        cols=cols,
    )


def _raw(x) -> np.ndarray:
    if isinstance(x, MultiChannelImage):
        return x.pixels
    if isinstance(x, InstanceMask):
        return x.labels
    if isinstance(x, BinaryMask):
        return x.bits
    if isinstance(x, ProbabilityMask):
        return x.values
    return np.asarray(x)


def extract_patches(x, grid: PatchGrid) -> list[np.ndarray]:
    """Row-major list of patch arrays; padded pixels are 0 (background)."""
    arr = _raw(x)
    if arr.shape[0] != grid.orig_h or arr.shape[1] != grid.orig_w:
        raise ValueError(
            f"raster is {arr.shape[1]}x{arr.shape[0]}, grid expects "
            f"{grid.orig_w}x{grid.orig_h}"
        )
    pad = [(0, grid.pad_bottom), (0, grid.pad_right)] + [(0, 0)] * (arr.ndim - 2)
    padded = np.pad(arr, pad, mode="constant", constant_values=0)
    p = grid.patch
    out = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            out.append(padded[r * p : (r + 1) * p, c * p : (c + 1) * p].copy())
    return out


def reconstruct(patches: list[np.ndarray], grid: PatchGrid) -> np.ndarray:
    """Inverse of extract_patches: stitch row-major patches, drop padding."""
    if len(patches) != grid.n_patches:
        raise ValueError(f"expected {grid.n_patches} patches, got {len(patches)}")
    p = grid.patch
    first = np.asarray(patches[0])
    for i, pt in enumerate(patches):
        pt = np.asarray(pt)
        if pt.shape[:2] != (p, p):
            raise ValueError(f"patch {i} has shape {pt.shape}, expected {p}x{p}")
        if pt.ndim != first.ndim:
            raise ValueError("patches disagree on channel dimensionality")
    full_shape = (grid.rows * p, grid.cols * p) + first.shape[2:]
    full = np.zeros(full_shape, dtype=first.dtype)
    for idx, pt in enumerate(patches):
        r, c = divmod(idx, grid.cols)
        full[r * p : (r + 1) * p, c * p : (c + 1) * p] = pt
    return full[: grid.orig_h, : grid.orig_w].copy()
