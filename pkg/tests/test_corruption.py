"""Corruption operations against brute-force oracles.

The oracles here are deliberately naive: BFS flood fill for connected
components, and per-pixel set arithmetic for erosion/dilation.  They share
no code with the implementation.
"""
import numpy as np
import pytest

from segstress.corruption import (
    erase_cells,
    index_cells,
    relabel_components,
    resegment_cells,
)
from segstress.types import BinaryMask, InstanceMask
from conftest import random_cell_mask


# -- oracles -------------------------------------------------------------------


def bfs_components(fg: np.ndarray, connectivity: int) -> np.ndarray:
    """Flood-fill labelling, numbered by first pixel in row-major order."""
    h, w = fg.shape
    if connectivity == 8:
        nbrs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        nbrs = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    out = np.zeros((h, w), dtype=np.uint32)
    next_label = 1
    for r in range(h):
        for c in range(w):
            if fg[r, c] and out[r, c] == 0:
                stack = [(r, c)]
                out[r, c] = next_label
                while stack:
                    y, x = stack.pop()
                    for dy, dx in nbrs:
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and fg[ny, nx] and out[ny, nx] == 0:
                            out[ny, nx] = next_label
                            stack.append((ny, nx))
                next_label += 1
    return out


def pixelset_morph(labels: np.ndarray, cell_id: int, k: int, op: str) -> set:
    """Set-arithmetic erosion/dilation of one cell with a k x k square."""
    h, w = labels.shape
    own = {(r, c) for r, c in zip(*np.nonzero(labels == cell_id))}
    m = k // 2
    offsets = [(dy, dx) for dy in range(-m, m + 1) for dx in range(-m, m + 1)]
    if op == "erode":
        return {
            (r, c)
            for (r, c) in own
            if all((r + dy, c + dx) in own for dy, dx in offsets)
        }
    grown = {
        (r + dy, c + dx)
        for (r, c) in own
        for dy, dx in offsets
        if 0 <= r + dy < h and 0 <= c + dx < w
    }
    return grown


def oracle_resegment_forced(labels: np.ndarray, k: int, op: str) -> np.ndarray:
    """All cells forced to the same op/kernel; dilation claims background only,
    contested pixels to the lower id."""
    out = np.zeros_like(labels)
    background = labels == 0
    for cell_id in sorted(int(i) for i in np.unique(labels) if i > 0):
        new = pixelset_morph(labels, cell_id, k, op)
        for (r, c) in new:
            if op == "dilate" and not (labels[r, c] == cell_id or background[r, c]):
                continue
            if out[r, c] == 0:
                out[r, c] = cell_id
    return out


# -- connected components -------------------------------------------------------


def test_diagonal_pixels_connectivity():
    bits = np.zeros((3, 3), dtype=np.uint8)
    bits[0, 0] = 1
    bits[1, 1] = 1
    m8 = relabel_components(BinaryMask(bits=bits), connectivity=8)
    m4 = relabel_components(BinaryMask(bits=bits), connectivity=4)
    assert m8.num_cells == 1
    assert m4.num_cells == 2


def test_empty_mask_relabel():
    out = relabel_components(BinaryMask(bits=np.zeros((4, 4), dtype=np.uint8)))
    assert out.num_cells == 0


def test_relabel_numbering_is_first_pixel_row_major():
    bits = np.zeros((5, 7), dtype=np.uint8)
    bits[4, 0] = 1  # later in raster order
    bits[0, 6] = 1  # first row, so label 1
    out = relabel_components(BinaryMask(bits=bits), connectivity=8).labels
    assert out[0, 6] == 1
    assert out[4, 0] == 2


def test_relabel_ignores_existing_instance_boundaries():
    labels = np.array([[1, 2, 2]], dtype=np.uint32)  # touching distinct ids
    out = relabel_components(InstanceMask(labels=labels), connectivity=8)
    assert out.num_cells == 1


@pytest.mark.parametrize("connectivity", [4, 8])
def test_relabel_matches_bfs_oracle(connectivity, rng):
    for _ in range(40):
        h = int(rng.integers(1, 24))
        w = int(rng.integers(1, 24))
        fg = (rng.random((h, w)) < 0.45).astype(np.uint8)
        ours = relabel_components(BinaryMask(bits=fg), connectivity=connectivity).labels
        oracle = bfs_components(fg, connectivity)
        assert np.array_equal(ours, oracle)


# -- erase_cells ------------------------------------------------------------------


def test_erase_exact_count():
    mask = random_cell_mask(np.random.default_rng(0), 40, 40, 14)
    n = mask.num_cells
    assert n >= 10
    out = erase_cells(mask, 0.5, seed=7)
    assert out.num_cells == n - round(0.5 * n)


def test_erase_zero_fraction_identity(rng):
    mask = random_cell_mask(rng, 30, 30, 8)
    out = erase_cells(mask, 0.0, seed=3)
    assert np.array_equal(out.labels, mask.labels)


def test_erase_full_fraction():
    mask = random_cell_mask(np.random.default_rng(5), 30, 30, 8)
    out = erase_cells(mask, 1.0, seed=3)
    assert out.num_cells == 0
    assert out.labels.sum() == 0


def test_erase_round_half_away_from_zero():
    labels = np.zeros((4, 12), dtype=np.uint32)
    labels[0, 0], labels[0, 4], labels[0, 8] = 1, 2, 3
    mask = InstanceMask(labels=labels)
    out = erase_cells(mask, 0.5, seed=11)  # round(1.5) -> 2 by the stated rule
    assert out.num_cells == 1


def test_erase_survivors_bit_identical(rng):
    for trial in range(25):
        mask = random_cell_mask(rng, 36, 36, 12)
        frac = float(rng.random())
        out = erase_cells(mask, frac, seed=trial)
        for cid in out.cell_ids():
            assert np.array_equal(out.labels == cid, mask.labels == cid)
        assert out.num_cells == mask.num_cells - round(frac * mask.num_cells)


def test_erase_deterministic():
    mask = random_cell_mask(np.random.default_rng(9), 40, 40, 10)
    a = erase_cells(mask, 0.4, seed=123)
    b = erase_cells(mask, 0.4, seed=123)
    c = erase_cells(mask, 0.4, seed=124)
    assert np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.labels, c.labels) or mask.num_cells == 0


# -- resegment_cells ---------------------------------------------------------------


def _single_square(size: int, field: int = 21) -> InstanceMask:
    labels = np.zeros((field, field), dtype=np.uint32)
    lo = (field - size) // 2
    labels[lo : lo + size, lo : lo + size] = 1
    return InstanceMask(labels=labels)


def test_forced_erode_square_algebra():
    mask = _single_square(5)
    out = resegment_cells(mask, 3, seed=0, force_op="erode", force_k=3)
    assert int((out.labels == 1).sum()) == 9  # 3x3 centered
    inner = _single_square(3)
    assert np.array_equal(out.labels, inner.labels)


def test_forced_dilate_square_algebra():
    mask = _single_square(5)
    out = resegment_cells(mask, 3, seed=0, force_op="dilate", force_k=3)
    assert np.array_equal(out.labels, _single_square(7).labels)


def test_kmax_zero_is_identity(rng):
    mask = random_cell_mask(rng, 32, 32, 9)
    for seed in (0, 1, 99):
        out = resegment_cells(mask, 0, seed=seed)
        assert np.array_equal(out.labels, mask.labels)


def test_single_pixel_cell_annihilated_by_erosion():
    labels = np.zeros((9, 9), dtype=np.uint32)
    labels[4, 4] = 1
    out = resegment_cells(InstanceMask(labels=labels), 3, seed=0,
                          force_op="erode", force_k=3)
    assert out.num_cells == 0


def test_dilation_contention_goes_to_lower_id():
    labels = np.zeros((5, 7), dtype=np.uint32)
    labels[2, 2] = 1
    labels[2, 4] = 2  # one background pixel between them at (2, 3)
    out = resegment_cells(InstanceMask(labels=labels), 3, seed=0,
                          force_op="dilate", force_k=3)
    assert out.labels[2, 3] == 1
    oracle = oracle_resegment_forced(labels, 3, "dilate")
    assert np.array_equal(out.labels, oracle)


@pytest.mark.parametrize("op", ["erode", "dilate"])
@pytest.mark.parametrize("k", [3, 5])
def test_forced_morphology_matches_set_oracle(op, k, rng):
    for trial in range(15):
        mask = random_cell_mask(rng, 28, 28, 8)
        out = resegment_cells(mask, 9, seed=trial, force_op=op, force_k=k)
        oracle = oracle_resegment_forced(mask.labels, k, op)
        assert np.array_equal(out.labels, oracle)


def test_all_erode_shrinks_all_dilate_grows(rng):
    for trial in range(10):
        mask = random_cell_mask(rng, 30, 30, 7)
        fg = mask.labels > 0
        eroded = resegment_cells(mask, 9, seed=trial, force_op="erode")
        dilated = resegment_cells(mask, 9, seed=trial, force_op="dilate")
        assert np.all(fg[eroded.labels > 0])  # foreground(out) subset of fg(in)
        assert np.all((dilated.labels > 0)[fg])  # fg(in) subset of fg(out)


def test_resegment_never_invents_labels(rng):
    for trial in range(10):
        mask = random_cell_mask(rng, 30, 30, 9)
        out = resegment_cells(mask, 9, seed=trial)
        in_ids = set(int(i) for i in mask.cell_ids())
        out_ids = set(int(i) for i in out.cell_ids())
        assert out_ids <= in_ids


def test_resegment_deterministic_and_seed_sensitive(rng):
    mask = random_cell_mask(rng, 40, 40, 12)
    a = resegment_cells(mask, 9, seed=5)
    b = resegment_cells(mask, 9, seed=5)
    assert np.array_equal(a.labels, b.labels)


def test_resegment_invalid_kmax():
    mask = _single_square(3)
    with pytest.raises(ValueError):
        resegment_cells(mask, 4, seed=0)


def test_index_cells_records():
    labels = np.zeros((6, 6), dtype=np.uint32)
    labels[0:2, 0:3] = 4
    labels[5, 5] = 9
    records = index_cells(InstanceMask(labels=labels))
    assert [r.cell_id for r in records] == [4, 9]
    assert records[0].size == 6
    assert records[0].bbox == (0, 0, 2, 3)
    assert records[1].size == 1


def test_composition_order_erase_then_resegment(rng):
    # the canonical composition used by the orchestrator
    from segstress.corruption import corrupt
    from segstress.types import CorruptionSpec

    mask = random_cell_mask(rng, 36, 36, 10)
    spec = CorruptionSpec(missing_fraction=0.5, k_max=5, seed=77)
    out = corrupt(mask, spec)
    survivors = erase_cells(mask, 0.5, 77)
    assert set(map(int, out.cell_ids())) <= set(map(int, survivors.cell_ids()))
