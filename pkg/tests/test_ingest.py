import json

import numpy as np
import pytest

from segstress.ingest import (
    Acquisition,
    load_channel_config,
    load_dataset,
    load_tensor_file,
    percentile_normalize,
    select_channels,
    split_dataset,
)
from segstress.tensorfile import save_tensor
from segstress.types import InstanceMask, MultiChannelImage


def _image(values, names):
    return MultiChannelImage(pixels=np.asarray(values, dtype=np.float32), channel_names=names)


# -- load_tensor_file ------------------------------------------------------------


def test_load_tensor_file_types(tmp_path):
    save_tensor(tmp_path / "img.sgt", np.zeros((2, 3, 4), dtype=np.float32))
    save_tensor(tmp_path / "inst.sgt", np.zeros((2, 3), dtype=np.uint32))
    save_tensor(tmp_path / "bin.sgt", np.zeros((2, 3), dtype=np.uint8))
    save_tensor(tmp_path / "prob.sgt", np.zeros((2, 3), dtype=np.float32))
    from segstress.types import BinaryMask, ProbabilityMask

    assert isinstance(load_tensor_file(tmp_path / "img.sgt"), MultiChannelImage)
    assert isinstance(load_tensor_file(tmp_path / "inst.sgt"), InstanceMask)
    assert isinstance(load_tensor_file(tmp_path / "bin.sgt"), BinaryMask)
    assert isinstance(load_tensor_file(tmp_path / "prob.sgt"), ProbabilityMask)


# -- select_channels --------------------------------------------------------------


def test_select_reorders():
    img = _image(np.stack([np.full((2, 2), v) for v in (1, 2, 3)], axis=-1), ("A", "B", "C"))
    out = select_channels(img, ["C", "A"])
    assert out.channel_names == ("C", "A")
    assert out.pixels[0, 0, 0] == 3 and out.pixels[0, 0, 1] == 1


def test_select_unknown_name():
    img = _image(np.zeros((2, 2, 3)), ("A", "B", "C"))
    with pytest.raises(KeyError):
        select_channels(img, ["D"])


def test_select_repeated_names_bind_in_source_order():
    px = np.stack([np.full((1, 1), v) for v in (10, 20, 30)], axis=-1)
    img = _image(px, ("A", "B", "A"))
    out = select_channels(img, ["A", "A"])
    assert out.pixels[0, 0, 0] == 10
    assert out.pixels[0, 0, 1] == 30


def test_select_too_many_repeats():
    img = _image(np.zeros((1, 1, 2)), ("A", "B"))
    with pytest.raises(KeyError):
        select_channels(img, ["A", "A"])


# -- percentile_normalize -----------------------------------------------------------


def test_normalize_constant_channel():
    img = _image(np.full((4, 4, 1), 3.0), ("a",))
    out = percentile_normalize(img, 99)
    assert np.allclose(out.pixels, 1.0)


def test_normalize_zero_channel_stays_zero():
    img = _image(np.zeros((4, 4, 1)), ("a",))
    out = percentile_normalize(img, 99)
    assert np.all(out.pixels == 0)


def test_normalize_values_1_to_100_oracle():
    # oracle: sort, interpolate at rank (n-1)*q/100, divide
    values = np.arange(1.0, 101.0)
    img = _image(values.reshape(10, 10, 1), ("a",))
    rank = (100 - 1) * 0.99
    lo = int(np.floor(rank))
    frac = rank - lo
    expected_p = values[lo] * (1 - frac) + values[lo + 1] * frac
    out = percentile_normalize(img, 99)
    assert out.pixels.max() == pytest.approx(100.0 / expected_p, rel=1e-6)


def test_normalize_no_clipping():
    img = _image(np.arange(1.0, 101.0).reshape(10, 10, 1), ("a",))
    out = percentile_normalize(img, 99)
    assert out.pixels.max() > 1.0


def test_normalize_scale_invariance(rng):
    px = rng.random((16, 16, 3)).astype(np.float32) * 50
    img = _image(px, ("a", "b", "c"))
    scaled = _image(px * 7.0, ("a", "b", "c"))
    a = percentile_normalize(img).pixels
    b = percentile_normalize(scaled).pixels
    assert np.allclose(a, b, rtol=1e-6)


def test_normalize_rejects_bad_percentile():
    img = _image(np.zeros((2, 2, 1)), ("a",))
    with pytest.raises(ValueError):
        percentile_normalize(img, 0.0)


# -- split_dataset -------------------------------------------------------------------


def test_split_ten_items():
    split = split_dataset([f"a{i}" for i in range(10)], seed=1)
    assert (len(split.train), len(split.val), len(split.test)) == (7, 1, 2)


def test_split_stratified_lung_cohort_apportionment():
    # 19 + 4 items: oracle is largest-remainder by hand per stratum
    items = [(f"d{i}", "disease") for i in range(19)] + [(f"h{i}", "healthy") for i in range(4)]
    split = split_dataset(items, seed=3, stratified=True)
    disease = [i for i in split.train if i.startswith("d")]
    healthy = [i for i in split.train if i.startswith("h")]
    assert len(disease) == 13 and len(healthy) == 3
    assert sum(1 for i in split.val if i.startswith("d")) == 2
    assert sum(1 for i in split.val if i.startswith("h")) == 0
    assert sum(1 for i in split.test if i.startswith("d")) == 4
    assert sum(1 for i in split.test if i.startswith("h")) == 1


def test_split_deterministic():
    ids = [f"x{i}" for i in range(23)]
    a = split_dataset(ids, seed=9)
    b = split_dataset(ids, seed=9)
    assert a == b
    c = split_dataset(ids, seed=10)
    assert a != c


def test_split_partitions_for_many_seeds():
    ids = [f"x{i}" for i in range(17)]
    for seed in range(1000):
        s = split_dataset(ids, seed=seed)
        assert sorted(s.train + s.val + s.test) == sorted(ids)


def test_split_rejects_bad_input():
    with pytest.raises(ValueError):
        split_dataset([], seed=0)
    with pytest.raises(ValueError):
        split_dataset(["a"], ratios=(0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ValueError):
        split_dataset(["a", "a"], seed=0)


# -- dataset manifest ------------------------------------------------------------------


def test_load_dataset_rejects_mismatched_dims(tmp_path, caplog):
    save_tensor(tmp_path / "img0.sgt", np.ones((4, 4, 2), dtype=np.float32))
    save_tensor(tmp_path / "mask0.sgt", np.zeros((4, 4), dtype=np.uint32))
    save_tensor(tmp_path / "img1.sgt", np.ones((4, 4, 2), dtype=np.float32))
    save_tensor(tmp_path / "mask1.sgt", np.zeros((5, 4), dtype=np.uint32))  # mismatched
    manifest = {
        "name": "t",
        "channel_names": ["a", "b"],
        "acquisitions": [
            {"id": "ok", "image": "img0.sgt", "mask": "mask0.sgt"},
            {"id": "bad", "image": "img1.sgt", "mask": "mask1.sgt"},
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    import logging

    with caplog.at_level(logging.WARNING):
        _, acqs = load_dataset(tmp_path / "manifest.json")
    assert [a.id for a in acqs] == ["ok"]
    assert any("rejecting" in r.message for r in caplog.records)
    assert acqs[0].image.channel_names == ("a", "b")


def test_acquisition_dim_check():
    img = _image(np.zeros((2, 2, 1)), ("a",))
    mask = InstanceMask(labels=np.zeros((3, 2), dtype=np.uint32))
    with pytest.raises(ValueError):
        Acquisition(id="x", image=img, gt_mask=mask)


def test_channel_config(tmp_path):
    path = tmp_path / "channels.json"
    path.write_text(json.dumps({"lung": ["DNA1", "DNA2"], "breast": ["DNA1"]}))
    cfg = load_channel_config(path)
    assert cfg["lung"] == ["DNA1", "DNA2"]
    path.write_text(json.dumps({"lung": "DNA1"}))
    with pytest.raises(ValueError):
        load_channel_config(path)
