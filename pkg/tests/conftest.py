import numpy as np
import pytest

from segstress.types import InstanceMask


def random_cell_mask(rng: np.random.Generator, h: int, w: int, n_blobs: int) -> InstanceMask:
    """Instance mask of small non-overlapping rectangles (ids 1..k, possibly < n_blobs)."""
    labels = np.zeros((h, w), dtype=np.uint32)
    next_id = 1
    for _ in range(n_blobs):
        bh = int(rng.integers(1, max(2, h // 4) + 1))
        bw = int(rng.integers(1, max(2, w // 4) + 1))
        r = int(rng.integers(0, max(1, h - bh + 1)))
        c = int(rng.integers(0, max(1, w - bw + 1)))
        region = labels[r : r + bh, c : c + bw]
        if (region != 0).any():
            continue
        region[:] = next_id
        next_id += 1
    return InstanceMask(labels=labels)


def random_blob_binary(rng: np.random.Generator, h: int, w: int, density: float = 0.4):
    return (rng.random((h, w)) < density).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
