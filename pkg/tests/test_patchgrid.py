import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segstress.patchgrid import extract_patches, plan_grid, reconstruct
from segstress.types import InstanceMask, MultiChannelImage


def test_plan_grid_300x200():
    g = plan_grid(300, 200, 128)
    assert (g.rows, g.cols) == (2, 3)
    assert (g.pad_right, g.pad_bottom) == (84, 56)
    assert g.n_patches == 6


def test_plan_grid_exact_fit():
    g = plan_grid(128, 128, 128)
    assert (g.rows, g.cols, g.pad_right, g.pad_bottom) == (1, 1, 0, 0)


def test_plan_grid_minimal():
    g = plan_grid(1, 1, 128)
    assert (g.rows, g.cols, g.pad_right, g.pad_bottom) == (1, 1, 127, 127)


def test_plan_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        plan_grid(0, 10, 128)


def test_exact_fit_has_no_padded_pixels(rng):
    arr = rng.random((128, 256)).astype(np.float32)
    g = plan_grid(256, 128, 128)
    patches = extract_patches(arr, g)
    assert np.array_equal(np.hstack(patches), arr)


def test_padding_region_is_zero(rng):
    arr = rng.random((200, 300, 2)).astype(np.float32) + 1.0
    g = plan_grid(300, 200, 128)
    patches = extract_patches(arr, g)
    corner = patches[1 * g.cols + 2]  # row 1, col 2
    assert np.all(corner[:, 300 - 2 * 128 :, :] == 0)
    assert np.all(corner[200 - 128 :, :, :] == 0)


def test_mask_patching_preserves_positive_count(rng):
    labels = (rng.random((150, 170)) < 0.2).astype(np.uint32) * 4
    mask = InstanceMask(labels=labels)
    g = plan_grid(170, 150, 64)
    patches = extract_patches(mask, g)
    assert sum(int((p > 0).sum()) for p in patches) == int((labels > 0).sum())


def test_every_pixel_in_exactly_one_patch():
    h, w, p = 200, 300, 128
    g = plan_grid(w, h, p)
    arr = np.arange(h * w, dtype=np.uint32).reshape(h, w)
    patches = extract_patches(arr, g)
    values, counts = np.unique(np.concatenate([pt.ravel() for pt in patches]), return_counts=True)
    assert np.all(counts[values != 0] == 1)  # pixel 0 aliases padding


def test_reconstruct_round_trip_image(rng):
    arr = rng.random((200, 300, 6)).astype(np.float32)
    img = MultiChannelImage(pixels=arr, channel_names=tuple("abcdef"))
    g = plan_grid(300, 200, 128)
    back = reconstruct(extract_patches(img, g), g)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_reconstruct_round_trip_instance_mask(rng):
    labels = rng.integers(0, 7, size=(99, 131)).astype(np.uint32)
    g = plan_grid(131, 99, 32)
    back = reconstruct(extract_patches(InstanceMask(labels=labels), g), g)
    assert np.array_equal(back, labels)


def test_reconstruct_wrong_patch_count():
    g = plan_grid(1, 1, 128)
    with pytest.raises(ValueError):
        reconstruct([np.zeros((128, 128))] * 6, g)


def test_reconstruct_wrong_patch_size():
    g = plan_grid(100, 100, 64)
    with pytest.raises(ValueError):
        reconstruct([np.zeros((64, 63))] * g.n_patches, g)


def test_extract_dimension_mismatch(rng):
    g = plan_grid(100, 100, 64)
    with pytest.raises(ValueError):
        extract_patches(np.zeros((99, 100)), g)


@settings(max_examples=80, deadline=None)
@given(
    h=st.integers(1, 300),
    w=st.integers(1, 300),
    patch=st.sampled_from([16, 64, 128]),
    kind=st.sampled_from(["f4", "u4", "u1"]),
    seed=st.integers(0, 2**31),
)
def test_round_trip_fuzz_all_raster_types(h, w, patch, kind, seed):
    rng = np.random.default_rng(seed)
    if kind == "f4":
        arr = rng.random((h, w, 3)).astype(np.float32)
    elif kind == "u4":
        arr = rng.integers(0, 50, size=(h, w), dtype=np.uint32)
    else:
        arr = rng.integers(0, 2, size=(h, w), dtype=np.uint8)
    g = plan_grid(w, h, patch)
    assert g.n_patches == -(-h // patch) * -(-w // patch)
    back = reconstruct(extract_patches(arr, g), g)
    assert back.dtype == arr.dtype
    assert np.array_equal(back, arr)
