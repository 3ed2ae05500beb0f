import json

import numpy as np
import pytest

from segstress.orchestrator.protocol import (
    SegmenterExitError,
    SegmenterManifest,
    SegmenterOutputError,
    SegmenterError,
    TrainParams,
    invoke_segmenter,
    read_manifest,
    validate_segmenter,
    write_manifest,
)
from segstress.tensorfile import save_tensor


def _patch_files(tmp_path, n, channels=2, size=16):
    rng = np.random.default_rng(0)
    patches, targets = [], []
    for i in range(n):
        p = tmp_path / f"x_p{i:04d}.sgt"
        t = tmp_path / f"t_p{i:04d}.sgt"
        save_tensor(p, rng.random((size, size, channels)).astype(np.float32))
        save_tensor(t, (rng.random((size, size)) < 0.3).astype(np.uint8))
        patches.append(str(p))
        targets.append(str(t))
    return patches, targets


def _train_manifest(tmp_path, patches, targets, **kw):
    defaults = dict(
        task="train",
        channels=2,
        patch_size=16,
        model_path=str(tmp_path / "model.bin"),
        output_dir=str(tmp_path / "out"),
        train_patches=patches[2:],
        train_targets=targets[2:],
        val_patches=patches[:2],
        val_targets=targets[:2],
    )
    defaults.update(kw)
    return SegmenterManifest(**defaults)


def test_manifest_validation_rules(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    with pytest.raises(ValueError):
        _train_manifest(tmp_path, patches, targets[:-1] + [])  # length mismatch
    with pytest.raises(ValueError):
        SegmenterManifest(
            task="predict", channels=2, patch_size=16, model_path="m",
            output_dir="o", predict_patches=patches, predict_outputs=["only_one.sgt"],
        )
    with pytest.raises(ValueError):
        SegmenterManifest(
            task="nonsense", channels=2, patch_size=16, model_path="m", output_dir="o"
        )


def test_manifest_round_trip(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    manifest = _train_manifest(tmp_path, patches, targets,
                               train_params=TrainParams(epochs=3))
    path = write_manifest(tmp_path / "m.json", manifest)
    back = read_manifest(path)
    assert back == manifest


def test_write_manifest_requires_existing_inputs(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    manifest = _train_manifest(tmp_path, patches[:-1] + [str(tmp_path / "ghost.sgt")], targets)
    with pytest.raises(SegmenterError):
        write_manifest(tmp_path / "m.json", manifest)


def test_stub_exit_code_and_stderr(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    manifest = _train_manifest(tmp_path, patches, targets)
    with pytest.raises(SegmenterExitError) as exc_info:
        invoke_segmenter(
            ["segstress-stub", "fail", "--code", "3"],
            manifest, tmp_path / "m.json", log_path=tmp_path / "log.txt",
        )
    assert exc_info.value.code == 3
    assert "purpose" in exc_info.value.stderr_tail
    assert "exit=3" in (tmp_path / "log.txt").read_text()


def test_stub_missing_model(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    manifest = _train_manifest(tmp_path, patches, targets)
    with pytest.raises(SegmenterOutputError):
        invoke_segmenter(["segstress-stub", "silent"], manifest, tmp_path / "m.json")


def test_stub_bad_shape_names_file(tmp_path):
    patches, targets = _patch_files(tmp_path, 4)
    train_manifest = _train_manifest(tmp_path, patches, targets)
    invoke_segmenter(["segstress-stub", "badshape"], train_manifest, tmp_path / "mt.json")
    manifest = SegmenterManifest(
        task="predict", channels=2, patch_size=16,
        model_path=train_manifest.model_path, output_dir=str(tmp_path / "out"),
        predict_patches=patches, predict_outputs=[f"pred_{i}.sgt" for i in range(4)],
    )
    with pytest.raises(SegmenterOutputError) as exc_info:
        invoke_segmenter(["segstress-stub", "badshape"], manifest, tmp_path / "mp.json")
    assert "pred_0.sgt" in str(exc_info.value)


def test_stub_missing_prediction_named(tmp_path):
    patches, targets = _patch_files(tmp_path, 3)
    train_manifest = _train_manifest(tmp_path, patches, targets)
    invoke_segmenter(["segstress-stub", "badshape"], train_manifest, tmp_path / "mt.json")
    manifest = SegmenterManifest(
        task="predict", channels=2, patch_size=16,
        model_path=train_manifest.model_path, output_dir=str(tmp_path / "out2"),
        predict_patches=patches, predict_outputs=[f"pred_{i}.sgt" for i in range(3)],
    )
    with pytest.raises(SegmenterOutputError) as exc_info:
        invoke_segmenter(["segstress-stub", "silent"], manifest, tmp_path / "mp.json")
    assert "was not written" in str(exc_info.value)


def test_baseline_is_protocol_conformant(tmp_path):
    # the built-in segmenter must pass its own orchestrator's validation suite
    report = validate_segmenter(
        ["segstress-baseline"],
        tmp_path,
        n_patches=8,
        channels=6,
        patch_size=32,
        epochs=2,
        seed=1,
    )
    assert report["ok"] is True
    assert report["outputs_validated"] == 8
    history = json.loads((tmp_path / "model.history.json").read_text())
    assert len(history) == 2  # epochs honored through the manifest


def test_probability_range_enforced(tmp_path):
    patches, targets = _patch_files(tmp_path, 2)
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    save_tensor(out_dir / "pred_0.sgt", np.full((16, 16), 1.5, dtype=np.float32))
    save_tensor(out_dir / "pred_1.sgt", np.zeros((16, 16), dtype=np.float32))
    manifest = SegmenterManifest(
        task="predict", channels=2, patch_size=16, model_path=str(tmp_path / "m"),
        output_dir=str(out_dir), predict_patches=patches,
        predict_outputs=["pred_0.sgt", "pred_1.sgt"],
    )
    from segstress.orchestrator.protocol import _validate_probability_file

    with pytest.raises(SegmenterOutputError):
        _validate_probability_file(out_dir / "pred_0.sgt", 16)
    _validate_probability_file(out_dir / "pred_1.sgt", 16)
