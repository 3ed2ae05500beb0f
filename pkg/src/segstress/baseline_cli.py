"""Protocol entry point for the built-in segmenter (`segstress-baseline`)."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .baseline import TrainConfig, load_model, predict_from_features, featurize, save_model, train
from .orchestrator.protocol import read_manifest
from .tensorfile import load_tensor, save_tensor


def _load_pairs(patches: list[str], targets: list[str]) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(load_tensor(p), load_tensor(t)) for p, t in zip(patches, targets)]


def _run_train(manifest) -> None:
    params = manifest.train_params
    defaults = TrainConfig()
    config = TrainConfig(
        seed=manifest.seed,
        epochs=params.epochs or defaults.epochs,
        learning_rate=params.learning_rate or defaults.learning_rate,
        batch_size=params.batch_size or defaults.batch_size,
    )
    train_pairs = _load_pairs(manifest.train_patches, manifest.train_targets)
    val_pairs = _load_pairs(manifest.val_patches, manifest.val_targets)
    model, history = train(train_pairs, val_pairs, config)
    Path(manifest.model_path).parent.mkdir(parents=True, exist_ok=True)
    save_model(manifest.model_path, model)
    history_path = Path(manifest.model_path).with_suffix(".history.json")
    history_path.write_text(json.dumps([asdict(h) for h in history], indent=2))


def _run_predict(manifest) -> None:
    model = load_model(manifest.model_path)
    if model.trained_channels != manifest.channels:
        raise SystemExit(
            f"model expects {model.trained_channels} channels, manifest says "
            f"{manifest.channels}"
        )
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for patch_path, out_name in zip(manifest.predict_patches, manifest.predict_outputs):
        patch = load_tensor(patch_path)
        probs = predict_from_features(model.weights, featurize(patch))
        save_tensor(out_dir / out_name, probs.astype(np.float32))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="segstress-baseline",
        description="Built-in linear segmenter speaking the segmenter protocol",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in ("train", "predict"):
        p = sub.add_parser(task)
        p.add_argument("--manifest", required=True)
    args = parser.parse_args(argv)

    manifest = read_manifest(args.manifest)
    if manifest.task != args.task:
        print(
            f"manifest task {manifest.task!r} does not match subcommand {args.task!r}",
            file=sys.stderr,
        )
        return 2
    try:
        if args.task == "train":
            _run_train(manifest)
        else:
            _run_predict(manifest)
    except Exception as exc:  # protocol: nonzero exit with message on stderr
        print(f"segstress-baseline: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
