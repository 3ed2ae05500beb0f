"""Simulated annotation imperfections.

Two corruptions, composable as erase-then-resegment:

  * missing cells: a fixed fraction of cells, chosen uniformly without
    replacement, has every pixel erased to background;
  * under/over-segmentation: each cell is independently eroded or dilated
    with a k x k square structuring element, k drawn per cell from
    {k in {0,3,5,7,9} : k <= k_max} (k = 0 leaves the cell untouched).

Per-cell randomness comes from a stream keyed by (seed, cell id), so
results are identical however the cells are scheduled.  Dilation claims
background pixels only; a pixel contested by several dilating cells goes
to the lowest cell id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .rng import fisher_yates, stream
from .types import K_POOL, BinaryMask, CorruptionSpec, InstanceMask, binarize

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class CellRecord:
    cell_id: int
    size: int
    bbox: tuple[int, int, int, int]  # (row0, col0, row1, col1), half-open


def index_cells(mask: InstanceMask) -> list[CellRecord]:
    """Per-cell size and bounding box, sorted by cell id ascending."""
    labels = mask.labels
    ids = mask.cell_ids()
    if ids.size == 0:
        return []
    max_id = int(ids.max())
    sizes = np.bincount(labels.ravel(), minlength=max_id + 1)
    slices = ndimage.find_objects(labels.astype(np.int64), max_label=max_id)
    records = []
    for cid in ids:
        sl = slices[int(cid) - 1]
        records.append(
            CellRecord(
                cell_id=int(cid),
                size=int(sizes[int(cid)]),
                bbox=(sl[0].start, sl[1].start, sl[0].stop, sl[1].stop),
            )
        )
    return records


def _connectivity_structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCT_4
    if connectivity == 8:
        return _STRUCT_8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def relabel_components(mask, connectivity: int = 8) -> InstanceMask:
    """Connected-component labelling of the binarized foreground.

    Components are renumbered 1..N by the row-major position of their first
    pixel.  Existing instance labels are ignored: this is the enumeration
    device for masks that arrive without per-cell identity.
    """
    if isinstance(mask, InstanceMask):
        fg = mask.labels > 0
    elif isinstance(mask, BinaryMask):
        fg = mask.bits > 0
    else:
        fg = np.asarray(mask) != 0
    raw, n = ndimage.label(fg, structure=_connectivity_structure(connectivity))
    if n == 0:
        return InstanceMask(labels=np.zeros(fg.shape, dtype=np.uint32))
    flat = raw.ravel()
    order = np.full(n + 1, -1, dtype=np.int64)
    next_label = 1
    # scipy's label ids are not contractually scan-ordered; renumber by first
    # appearance so the numbering rule is ours, not the library's.
    first_seen = np.unique(flat, return_index=True)
    for old_id, pos in sorted(zip(first_seen[0], first_seen[1]), key=lambda t: t[1]):
        if old_id == 0:
            continue
        order[old_id] = next_label
        next_label += 1
    out = np.where(raw > 0, order[raw], 0).astype(np.uint32)
    return InstanceMask(labels=out)


def _round_half_away_from_zero(x: float) -> int:
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def erase_cells(mask: InstanceMask, fraction: float, seed: int) -> InstanceMask:
    """Erase round(fraction * N) cells, chosen by a seeded Fisher-Yates shuffle
    of the ascending cell ids; surviving cells are untouched."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} not in [0, 1]")
    ids = [int(i) for i in mask.cell_ids()]
    n_erase = _round_half_away_from_zero(fraction * len(ids))
    if n_erase == 0:
        return InstanceMask(labels=mask.labels.copy())
    shuffled = fisher_yates(ids, stream(seed, "erase"))
    doomed = np.array(sorted(shuffled[:n_erase]), dtype=np.uint32)
    labels = mask.labels.copy()
    labels[np.isin(labels, doomed)] = 0
    return InstanceMask(labels=labels)


def _square(k: int) -> np.ndarray:
    return np.ones((k, k), dtype=bool)


def _morph_cell(
    labels: np.ndarray, record: CellRecord, k: int, op: str
) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """New pixel set for one cell, computed on a margin-padded bbox crop.

    Returns (bool patch, patch bbox).  Erosion treats everything outside the
    cell as background; dilation grows into the crop and is clipped at the
    image border by construction.
    """
    h, w = labels.shape
    r0, c0, r1, c1 = record.bbox
    m = k // 2
    pr0, pc0 = max(0, r0 - m), max(0, c0 - m)
    pr1, pc1 = min(h, r1 + m), min(w, c1 + m)
    cell = labels[pr0:pr1, pc0:pc1] == record.cell_id
    if op == "erode":
        new = ndimage.binary_erosion(cell, structure=_square(k), border_value=0)
    elif op == "dilate":
        new = ndimage.binary_dilation(cell, structure=_square(k), border_value=0)
    else:
        raise ValueError(f"unknown morphology op {op!r}")
    return new, (pr0, pc0, pr1, pc1)


def resegment_cells(
    mask: InstanceMask,
    k_max: int,
    seed: int,
    force_op: str | None = None,
    force_k: int | None = None,
) -> InstanceMask:
    """Per-cell random erosion/dilation with square kernels up to k_max.

    For each cell (ascending id) a kernel size k is drawn uniformly from
    {k in {0,3,5,7,9} : k <= k_max}; k = 0 is a no-op, otherwise erode or
    dilate is chosen with probability 1/2.  Erosion may fragment or
    annihilate a cell; dilation claims only input-background pixels, with
    contested pixels going to the lower cell id.

    force_op/force_k override the draws (diagnostics and directional
    experiments); the per-cell streams are still consumed identically.
    """
    if k_max not in K_POOL:
        raise ValueError(f"k_max {k_max} not in {K_POOL}")
    if force_op not in (None, "erode", "dilate"):
        raise ValueError(f"force_op must be erode/dilate, got {force_op!r}")
    pool = [k for k in K_POOL if k <= k_max]
    labels = mask.labels
    background = labels == 0
    out = np.zeros_like(labels)
    for record in index_cells(mask):
        cell_rng = stream(seed, record.cell_id)
        k = int(pool[int(cell_rng.integers(0, len(pool)))])
        if force_k is not None:
            k = force_k
        if k == 0:
            box = record.bbox
            r0, c0, r1, c1 = box
            new = labels[r0:r1, c0:c1] == record.cell_id
        else:
            op = "erode" if int(cell_rng.integers(0, 2)) == 0 else "dilate"
            if force_op is not None:
                op = force_op
            new, box = _morph_cell(labels, record, k, op)
            if op == "dilate":
                r0, c0, r1, c1 = box
                own = labels[r0:r1, c0:c1] == record.cell_id
                new &= own | background[r0:r1, c0:c1]
        r0, c0, r1, c1 = box
        region = out[r0:r1, c0:c1]
        free = new & (region == 0)
        region[free] = record.cell_id
    return InstanceMask(labels=out)


def corrupt(mask: InstanceMask, spec: CorruptionSpec) -> InstanceMask:
    """Canonical composition: erase missing cells, then resegment survivors."""
    out = erase_cells(mask, spec.missing_fraction, spec.seed)
    if spec.k_max > 0:
        out = resegment_cells(out, spec.k_max, spec.seed)
    return out


def count_cells(mask: InstanceMask) -> int:
    return mask.num_cells


__all__ = [
    "CellRecord",
    "index_cells",
    "relabel_components",
    "erase_cells",
    "resegment_cells",
    "corrupt",
    "count_cells",
]
