"""The segmenter protocol: how the orchestrator talks to any segmenter.

A segmenter is a subprocess command honoring two subcommands:

    <cmd> train   --manifest m.json
    <cmd> predict --manifest m.json

The manifest is JSON (schema below); every raster crossing the boundary
is an "SGT1" tensor file.  Patch lists are in canonical row-major patch
order.  A conforming segmenter exits 0 and produces exactly the promised
outputs: the model file after train, one float32 probability patch per
input after predict.  Everything else is a protocol error.
"""
from __future__ import annotations

import json
import subprocess
import time
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..tensorfile import TensorFileError, load_tensor


class TrainParams(BaseModel):
    """Optional hyperparameter passthrough; segmenters use their own defaults
    for anything unset."""

    epochs: int | None = None
    learning_rate: float | None = None
    batch_size: int | None = None


class SegmenterManifest(BaseModel):
    task: str = Field(pattern="^(train|predict)$")
    channels: int = Field(ge=1)
    patch_size: int = Field(ge=1)
    seed: int = 0
    model_path: str
    output_dir: str
    train_patches: list[str] = []
    train_targets: list[str] = []
    val_patches: list[str] = []
    val_targets: list[str] = []
    predict_patches: list[str] = []
    predict_outputs: list[str] = []
    train_params: TrainParams = TrainParams()

    @model_validator(mode="after")
    def _consistent(self):
        if self.task == "train":
            if not self.train_patches or not self.val_patches:
                raise ValueError("train manifest needs train and val patches")
            if len(self.train_patches) != len(self.train_targets):
                raise ValueError("train patch/target lists disagree")
            if len(self.val_patches) != len(self.val_targets):
                raise ValueError("val patch/target lists disagree")
        else:
            if not self.predict_patches:
                raise ValueError("predict manifest needs patches")
            if len(self.predict_patches) != len(self.predict_outputs):
                raise ValueError("predict patch/output lists disagree")
        return self

    def input_files(self) -> list[Path]:
        return [
            Path(p)
            for p in (
                *self.train_patches,
                *self.train_targets,
                *self.val_patches,
                *self.val_targets,
                *self.predict_patches,
            )
        ]

    def output_paths(self) -> list[Path]:
        base = Path(self.output_dir)
        return [base / p for p in self.predict_outputs]


class SegmenterError(RuntimeError):
    """Protocol violation by a segmenter subprocess."""


class SegmenterExitError(SegmenterError):
    def __init__(self, cmd: list[str], code: int, stderr_tail: str):
        super().__init__(
            f"segmenter {' '.join(cmd)} exited with code {code}; stderr tail:\n{stderr_tail}"
        )
        self.code = code
        self.stderr_tail = stderr_tail


class SegmenterTimeoutError(SegmenterError):
    pass


class SegmenterOutputError(SegmenterError):
    def __init__(self, file: str, reason: str):
        super().__init__(f"segmenter output {file}: {reason}")
        self.file = file
        self.reason = reason


def write_manifest(path: str | Path, manifest: SegmenterManifest) -> Path:
    missing = [str(p) for p in manifest.input_files() if not p.exists()]
    if missing:
        raise SegmenterError(f"manifest references missing files: {missing[:5]}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2))
    return path


def read_manifest(path: str | Path) -> SegmenterManifest:
    return SegmenterManifest.model_validate_json(Path(path).read_text())


def _validate_probability_file(path: Path, patch_size: int) -> None:
    if not path.exists():
        raise SegmenterOutputError(str(path), "promised output was not written")
    try:
        arr = load_tensor(path)
    except TensorFileError as exc:
        raise SegmenterOutputError(str(path), f"not a valid tensor file: {exc}") from exc
    if arr.dtype != np.float32 or arr.ndim != 2:
        raise SegmenterOutputError(
            str(path), f"expected 2-d float32, got {arr.ndim}-d {arr.dtype}"
        )
    if arr.shape != (patch_size, patch_size):
        raise SegmenterOutputError(
            str(path), f"expected {patch_size}x{patch_size}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise SegmenterOutputError(str(path), "probabilities must be finite in [0, 1]")


def invoke_segmenter(
    cmd: list[str],
    manifest: SegmenterManifest,
    manifest_path: str | Path,
    log_path: str | Path | None = None,
    timeout_s: float = 3600.0,
) -> None:
    """Write the manifest, run the segmenter subprocess, validate its outputs."""
    manifest_path = write_manifest(manifest_path, manifest)
    Path(manifest.output_dir).mkdir(parents=True, exist_ok=True)
    argv = [*cmd, manifest.task, "--manifest", str(manifest_path)]
    started = time.monotonic()
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=timeout_s
        )
    except subprocess.TimeoutExpired as exc:
        raise SegmenterTimeoutError(
            f"segmenter {' '.join(argv)} exceeded {timeout_s}s"
        ) from exc
    if log_path is not None:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_path.write_text(
            f"$ {' '.join(argv)}\nexit={proc.returncode} "
            f"elapsed={time.monotonic() - started:.2f}s\n"
            f"--- stdout ---\n{proc.stdout}\n--- stderr ---\n{proc.stderr}\n"
        )
    if proc.returncode != 0:
        tail = "\n".join(proc.stderr.splitlines()[-10:])
        raise SegmenterExitError(argv, proc.returncode, tail)
    if manifest.task == "train":
        if not Path(manifest.model_path).exists():
            raise SegmenterOutputError(manifest.model_path, "model file was not written")
    else:
        for out in manifest.output_paths():
            _validate_probability_file(out, manifest.patch_size)


def validate_segmenter(
    cmd: list[str],
    workdir: str | Path,
    n_patches: int = 64,
    channels: int = 6,
    patch_size: int = 128,
    epochs: int = 2,
    seed: int = 0,
    timeout_s: float = 3600.0,
) -> dict:
    """Protocol conformance check against an arbitrary segmenter command.

    Generates synthetic patches, runs one train (epochs as given) and one
    predict round, and validates shapes and file formats exactly.  Returns a
    small report dict; raises SegmenterError on any violation.
    """
    from ..patchgrid import extract_patches, plan_grid
    from ..synthgen import SynthConfig, generate
    from ..tensorfile import save_tensor
    from ..types import binarize

    workdir = Path(workdir)
    data_dir = workdir / "data"
    out_dir = workdir / "out"
    data_dir.mkdir(parents=True, exist_ok=True)
    out_dir.mkdir(parents=True, exist_ok=True)

    patch_files: list[str] = []
    target_files: list[str] = []
    for i in range(n_patches):
        cfg = SynthConfig(
            width=patch_size,
            height=patch_size,
            n_cells=max(4, (patch_size // 16) ** 2 // 4),
            noise_sigma=0.2,
            seed=seed + i,
        )
        image, mask = generate(cfg)
        grid = plan_grid(patch_size, patch_size, patch_size)
        img_patch = extract_patches(image, grid)[0][:, :, :channels]
        tgt_patch = extract_patches(binarize(mask), grid)[0]
        p_path = data_dir / f"patch_{i:04d}.sgt"
        t_path = data_dir / f"target_{i:04d}.sgt"
        save_tensor(p_path, img_patch.astype(np.float32))
        save_tensor(t_path, tgt_patch.astype(np.uint8))
        patch_files.append(str(p_path))
        target_files.append(str(t_path))

    n_val = max(1, n_patches // 8)
    model_path = workdir / "model.bin"
    train_manifest = SegmenterManifest(
        task="train",
        channels=channels,
        patch_size=patch_size,
        seed=seed,
        model_path=str(model_path),
        output_dir=str(out_dir),
        train_patches=patch_files[n_val:],
        train_targets=target_files[n_val:],
        val_patches=patch_files[:n_val],
        val_targets=target_files[:n_val],
        train_params=TrainParams(epochs=epochs),
    )
    invoke_segmenter(
        cmd, train_manifest, workdir / "train_manifest.json",
        log_path=workdir / "train.log", timeout_s=timeout_s,
    )

    outputs = [f"pred_{i:04d}.sgt" for i in range(n_patches)]
    predict_manifest = SegmenterManifest(
        task="predict",
        channels=channels,
        patch_size=patch_size,
        seed=seed,
        model_path=str(model_path),
        output_dir=str(out_dir),
        predict_patches=patch_files,
        predict_outputs=outputs,
    )
    invoke_segmenter(
        cmd, predict_manifest, workdir / "predict_manifest.json",
        log_path=workdir / "predict.log", timeout_s=timeout_s,
    )
    return {
        "command": cmd,
        "n_patches": n_patches,
        "channels": channels,
        "patch_size": patch_size,
        "epochs": epochs,
        "model_file": str(model_path),
        "outputs_validated": len(outputs),
        "ok": True,
    }
