"""Test segmenters speaking the protocol (`segstress-stub <mode> ...`).

These exist to exercise the orchestrator, not to segment:

  oracle    predicts the true GT for every patch (needs --dataset); the
            whole pipeline must then score 1.0 end to end
  identity  predicts whatever targets it was trained on, making training
            targets a fixed point of bootstrapping
  fail      exits with a given code
  badshape  writes wrong-sized outputs
  silent    exits 0 without writing anything

The oracle resolves a patch file back to its acquisition through the
orchestrator's `<acq_id>_p<idx>.sgt` naming convention.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from .ingest import load_dataset
from .orchestrator.protocol import read_manifest
from .patchgrid import extract_patches, plan_grid
from .tensorfile import load_tensor, save_tensor
from .types import binarize

_PATCH_RE = re.compile(r"^(?P<acq>.+)_p(?P<idx>\d{4})\.sgt$")


def _parse_patch_name(path: str) -> tuple[str, int]:
    m = _PATCH_RE.match(Path(path).name)
    if not m:
        raise ValueError(f"cannot resolve acquisition from patch name {path!r}")
    return m.group("acq"), int(m.group("idx"))


def _run_oracle(manifest, dataset_path: str) -> None:
    _, acquisitions = load_dataset(dataset_path)
    by_id = {a.id: a for a in acquisitions}
    if manifest.task == "train":
        Path(manifest.model_path).write_text(json.dumps({"stub": "oracle"}))
        return
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for patch_path, out_name in zip(manifest.predict_patches, manifest.predict_outputs):
        acq_id, idx = _parse_patch_name(patch_path)
        acq = by_id[acq_id]
        grid = plan_grid(acq.image.width, acq.image.height, manifest.patch_size)
        patch = extract_patches(binarize(acq.gt_mask), grid)[idx]
        save_tensor(out_dir / out_name, patch.astype(np.float32))


def _run_identity(manifest) -> None:
    if manifest.task == "train":
        mapping = {
            Path(p).name: str(Path(t).resolve())
            for p, t in zip(manifest.train_patches, manifest.train_targets)
        }
        Path(manifest.model_path).write_text(
            json.dumps({"stub": "identity", "targets": mapping})
        )
        return
    model = json.loads(Path(manifest.model_path).read_text())
    mapping = model["targets"]
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for patch_path, out_name in zip(manifest.predict_patches, manifest.predict_outputs):
        key = Path(patch_path).name
        if key in mapping:
            bits = load_tensor(mapping[key])
            probs = (bits != 0).astype(np.float32)
        else:
            probs = np.zeros((manifest.patch_size, manifest.patch_size), dtype=np.float32)
        save_tensor(out_dir / out_name, probs)


def _run_badshape(manifest) -> None:
    if manifest.task == "train":
        Path(manifest.model_path).write_text(json.dumps({"stub": "badshape"}))
        return
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrong = np.zeros((manifest.patch_size // 2 + 1, 3), dtype=np.float32)
    for out_name in manifest.predict_outputs:
        save_tensor(out_dir / out_name, wrong)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="segstress-stub")
    parser.add_argument("mode", choices=["oracle", "identity", "fail", "badshape", "silent"])
    parser.add_argument("--dataset", help="dataset manifest (oracle mode)")
    parser.add_argument("--code", type=int, default=3, help="exit code (fail mode)")
    parser.add_argument("task", choices=["train", "predict"])
    parser.add_argument("--manifest", required=True)
    args = parser.parse_args(argv)

    if args.mode == "fail":
        print("stub failing on purpose", file=sys.stderr)
        return args.code

    manifest = read_manifest(args.manifest)
    if args.mode == "silent":
        return 0
    if args.mode == "oracle":
        if not args.dataset:
            print("oracle stub needs --dataset", file=sys.stderr)
            return 2
        _run_oracle(manifest, args.dataset)
    elif args.mode == "identity":
        _run_identity(manifest)
    elif args.mode == "badshape":
        _run_badshape(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
