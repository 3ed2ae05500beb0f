"""The three experiment families, driven through the segmenter protocol.

Shared shape of every experiment point:

  1. corrupt the train (and, by default, validation) ground truth;
  2. train the segmenter via a manifest + subprocess;
  3. predict on the untouched test split, reconstruct full-size masks;
  4. per-image confusion against pristine test GT, mean over images.

Test-split ground truth never passes through a corruption operation; its
provenance sidecars prove it, and evaluation asserts it.  Every stage is
content-addressed in the artifact store, so re-running a finished
experiment is a no-op and sweep points can run independently.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import metrics as metrics_mod
from ..corruption import erase_cells, resegment_cells
from ..ingest import (
    Acquisition,
    DatasetSplit,
    load_dataset,
    percentile_normalize,
    select_channels,
    split_dataset,
)
from ..patchgrid import PatchGrid, extract_patches, plan_grid, reconstruct
from ..rng import derive_seed
from ..tensorfile import load_tensor, save_tensor
from ..types import BinaryMask, InstanceMask, binarize
from .config import DatasetRef, ExperimentConfig
from .protocol import SegmenterManifest, TrainParams, invoke_segmenter
from .store import ArtifactStore, MaskProvenance

log = logging.getLogger(__name__)


@dataclass
class PreparedDataset:
    ref: DatasetRef
    acquisitions: dict[str, Acquisition]
    split: DatasetSplit
    grids: dict[str, PatchGrid]

    def ids(self, role: str) -> tuple[str, ...]:
        return getattr(self.split, role)


def prepare_dataset(ref: DatasetRef, config: ExperimentConfig) -> PreparedDataset:
    _, acquisitions = load_dataset(ref.manifest)
    if not acquisitions:
        raise ValueError(f"dataset {ref.name}: no usable acquisitions")
    prepared = {}
    grids = {}
    for acq in acquisitions:
        image = acq.image
        if ref.channels:
            image = select_channels(image, ref.channels)
        image = percentile_normalize(image, config.normalize_percentile)
        prepared[acq.id] = Acquisition(
            id=acq.id, image=image, gt_mask=acq.gt_mask, stratum=acq.stratum
        )
        grids[acq.id] = plan_grid(image.width, image.height, config.patch_size)
    split = split_dataset(
        list(prepared.values()),
        ratios=config.split_ratios,
        seed=derive_seed(config.seed, "split", ref.name),
        stratified=ref.stratified,
    )
    return PreparedDataset(ref=ref, acquisitions=prepared, split=split, grids=grids)


def _patch_name(acq_id: str, idx: int) -> str:
    return f"{acq_id}_p{idx:04d}.sgt"


class ExperimentRunner:
    """Stage plumbing shared by all experiment families."""

    def __init__(self, config: ExperimentConfig, out_dir: str | Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.store = ArtifactStore(self.out_dir / "store")
        self.cfg_hash = config.config_hash()
        self.datasets = [prepare_dataset(ref, config) for ref in config.datasets]

    # -- stages ------------------------------------------------------------

    def image_patches(self, ds: PreparedDataset, role: str) -> dict[str, list[str]]:
        """Patch tensor files for every acquisition of a split role."""
        params = {"cfg": self.cfg_hash, "dataset": ds.ref.name, "role": role}

        def produce(sdir: Path) -> dict:
            files: dict[str, list[str]] = {}
            for acq_id in ds.ids(role):
                acq = ds.acquisitions[acq_id]
                patches = extract_patches(acq.image, ds.grids[acq_id])
                paths = []
                for i, patch in enumerate(patches):
                    p = sdir / _patch_name(acq_id, i)
                    save_tensor(p, patch.astype(np.float32))
                    paths.append(str(p))
                files[acq_id] = paths
            return {"files": files}

        return self.store.run_stage("img-patches", params, produce)["files"]

    def pristine_test_masks(self, ds: PreparedDataset) -> dict[str, str]:
        """Full-size test GT masks with pristine provenance tags."""
        params = {"cfg": self.cfg_hash, "dataset": ds.ref.name}

        def produce(sdir: Path) -> dict:
            files = {}
            for acq_id in ds.ids("test"):
                p = sdir / f"{acq_id}_gt.sgt"
                save_tensor(p, ds.acquisitions[acq_id].gt_mask.labels)
                MaskProvenance.write(p, source=acq_id, role="test", ops=[])
                files[acq_id] = str(p)
            return {"files": files}

        return self.store.run_stage("test-gt", params, produce)["files"]

    def corrupted_targets(
        self,
        ds: PreparedDataset,
        role: str,
        fraction: float,
        k_max: int,
        point: str,
        force_op: str | None = None,
    ) -> dict[str, list[str]]:
        """Binary target patches after erase(+resegment) of the role's GT."""
        params = {
            "cfg": self.cfg_hash,
            "dataset": ds.ref.name,
            "role": role,
            "fraction": fraction,
            "k_max": k_max,
            "point": point,
            "force_op": force_op,
        }
        point_seed = derive_seed(self.config.seed, point, ds.ref.name, role)

        def produce(sdir: Path) -> dict:
            files: dict[str, list[str]] = {}
            for acq_id in ds.ids(role):
                acq = ds.acquisitions[acq_id]
                acq_seed = derive_seed(point_seed, acq_id)
                mask = acq.gt_mask
                ops = []
                if fraction > 0:
                    mask = erase_cells(mask, fraction, acq_seed)
                    ops.append({"op": "erase_cells", "fraction": fraction, "seed": acq_seed})
                if k_max > 0:
                    mask = resegment_cells(mask, k_max, acq_seed, force_op=force_op)
                    ops.append(
                        {"op": "resegment_cells", "k_max": k_max, "seed": acq_seed,
                         "force_op": force_op}
                    )
                full = sdir / f"{acq_id}_corrupted.sgt"
                save_tensor(full, mask.labels)
                MaskProvenance.write(full, source=acq_id, role=role, ops=ops)
                target = binarize(mask)
                paths = []
                for i, patch in enumerate(extract_patches(target, ds.grids[acq_id])):
                    p = sdir / _patch_name(acq_id, i)
                    save_tensor(p, patch.astype(np.uint8))
                    paths.append(str(p))
                files[acq_id] = paths
            return {"files": files}

        return self.store.run_stage("targets", params, produce)["files"]

    def pristine_targets(self, ds: PreparedDataset, role: str) -> dict[str, list[str]]:
        """Binary target patches of the unmodified GT (fraction 0, no kernels)."""
        return self.corrupted_targets(ds, role, 0.0, 0, point="pristine")

    def write_binary_targets(
        self, stage: str, params: dict, ds: PreparedDataset,
        targets: dict[str, np.ndarray], role: str, ops_note: list[dict],
    ) -> dict[str, list[str]]:
        """Store arbitrary full-size binary targets (bootstrap rounds)."""

        def produce(sdir: Path) -> dict:
            files: dict[str, list[str]] = {}
            for acq_id, bits in targets.items():
                full = sdir / f"{acq_id}_target.sgt"
                save_tensor(full, bits.astype(np.uint8))
                MaskProvenance.write(full, source=acq_id, role=role, ops=ops_note)
                paths = []
                mask = BinaryMask(bits=bits)
                for i, patch in enumerate(extract_patches(mask, ds.grids[acq_id])):
                    p = sdir / _patch_name(acq_id, i)
                    save_tensor(p, patch.astype(np.uint8))
                    paths.append(str(p))
                files[acq_id] = paths
            return {"files": files}

        return self.store.run_stage(stage, params, produce)["files"]

    def _flat(self, files: dict[str, list[str]], ids) -> list[str]:
        out = []
        for acq_id in ids:
            out.extend(files[acq_id])
        return out

    def train_model(
        self,
        point: str,
        channels: int,
        train_patches: list[str],
        train_targets: list[str],
        val_patches: list[str],
        val_targets: list[str],
        extra_params: dict | None = None,
    ) -> str:
        params = {
            "cfg": self.cfg_hash,
            "point": point,
            "train": train_targets,  # target content is keyed by stage dirs
            "val": val_targets,
        }
        if extra_params:
            params.update(extra_params)
        seg = self.config.segmenter

        def produce(sdir: Path) -> dict:
            model_path = sdir / "model.bin"
            manifest = SegmenterManifest(
                task="train",
                channels=channels,
                patch_size=self.config.patch_size,
                seed=derive_seed(self.config.seed, point, "train"),
                model_path=str(model_path),
                output_dir=str(sdir),
                train_patches=train_patches,
                train_targets=train_targets,
                val_patches=val_patches,
                val_targets=val_targets,
                train_params=TrainParams(
                    epochs=seg.epochs,
                    learning_rate=seg.learning_rate,
                    batch_size=seg.batch_size,
                ),
            )
            invoke_segmenter(
                seg.cmd, manifest, sdir / "train_manifest.json",
                log_path=sdir / "train.log", timeout_s=seg.timeout_s,
            )
            return {"model": str(model_path)}

        return self.store.run_stage("train", params, produce)["model"]

    def predict_patches(
        self, point: str, model_path: str, channels: int,
        files: dict[str, list[str]], ids,
    ) -> dict[str, list[str]]:
        params = {
            "cfg": self.cfg_hash,
            "point": point,
            "model": model_path,
            "inputs": self._flat(files, ids),
        }
        seg = self.config.segmenter

        def produce(sdir: Path) -> dict:
            patch_list = []
            out_names = []
            per_id: dict[str, list[str]] = {}
            for acq_id in ids:
                per_id[acq_id] = []
                for p in files[acq_id]:
                    name = f"pred_{Path(p).name}"
                    patch_list.append(p)
                    out_names.append(name)
                    per_id[acq_id].append(str(sdir / name))
            manifest = SegmenterManifest(
                task="predict",
                channels=channels,
                patch_size=self.config.patch_size,
                seed=derive_seed(self.config.seed, point, "predict"),
                model_path=model_path,
                output_dir=str(sdir),
                predict_patches=patch_list,
                predict_outputs=out_names,
            )
            invoke_segmenter(
                seg.cmd, manifest, sdir / "predict_manifest.json",
                log_path=sdir / "predict.log", timeout_s=seg.timeout_s,
            )
            return {"files": per_id}

        return self.store.run_stage("predict", params, produce)["files"]

    def reconstruct_probability(
        self, ds: PreparedDataset, acq_id: str, pred_files: list[str]
    ) -> np.ndarray:
        patches = [load_tensor(p) for p in pred_files]
        return reconstruct(patches, ds.grids[acq_id])

    def evaluate_point(
        self, point: str, ds: PreparedDataset, model_path: str, channels: int
    ) -> dict:
        """Canonical protocol: reconstruct test predictions, per-image metrics
        against pristine GT, mean over images."""
        test_ids = ds.ids("test")
        img_files = self.image_patches(ds, "test")
        gt_files = self.pristine_test_masks(ds)
        preds = self.predict_patches(point, model_path, channels, img_files, test_ids)
        params = {
            "cfg": self.cfg_hash,
            "point": point,
            "dataset": ds.ref.name,
            "model": model_path,
        }

        def produce(sdir: Path) -> dict:
            per_image = {}
            for acq_id in test_ids:
                MaskProvenance.assert_pristine(gt_files[acq_id], role="test")
                gt = InstanceMask(labels=load_tensor(gt_files[acq_id]))
                prob = self.reconstruct_probability(ds, acq_id, preds[acq_id])
                pred_bits = metrics_mod.threshold(prob, self.config.threshold)
                report = metrics_mod.evaluate_pair(pred_bits, binarize(gt))
                per_image[acq_id] = report.as_dict()
            reports = [
                metrics_mod.compute_metrics((r["tp"], r["fp"], r["fn"], r["tn"]))
                for r in per_image.values()
            ]
            aggregate = metrics_mod.aggregate_reports(reports, self.config.eval_aggregate)
            stats = metrics_mod.summarize([r["dsc"] for r in per_image.values()])
            return {
                "per_image": per_image,
                "aggregate": aggregate,
                "dsc_summary": stats.as_dict(),
            }

        return self.store.run_stage("evaluate", params, produce)

    # -- one corruption point end to end ------------------------------------

    def corruption_point(
        self,
        point: str,
        ds: PreparedDataset,
        fraction: float,
        k_max: int = 0,
        force_op: str | None = None,
    ) -> dict:
        channels = ds.acquisitions[ds.ids("train")[0]].image.channels
        train_imgs = self.image_patches(ds, "train")
        val_imgs = self.image_patches(ds, "val")
        train_tgts = self.corrupted_targets(ds, "train", fraction, k_max, point, force_op)
        if self.config.corrupted_validation:
            val_tgts = self.corrupted_targets(ds, "val", fraction, k_max, point, force_op)
        else:
            val_tgts = self.pristine_targets(ds, "val")
        model = self.train_model(
            point,
            channels,
            self._flat(train_imgs, ds.ids("train")),
            self._flat(train_tgts, ds.ids("train")),
            self._flat(val_imgs, ds.ids("val")),
            self._flat(val_tgts, ds.ids("val")),
        )
        result = self.evaluate_point(point, ds, model, channels)
        result["model"] = model
        return result


# -- experiment families -----------------------------------------------------


def _write_results_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _point_rows(model_name: str, result: dict) -> list[dict]:
    rows = []
    for acq_id, rep in sorted(result["per_image"].items()):
        rows.append(
            {
                "model": model_name,
                "image_id": acq_id,
                "dsc": rep["dsc"],
                "jaccard": rep["jaccard"],
                "precision": rep["precision"],
                "recall": rep["recall"],
                "specificity": rep["specificity"],
            }
        )
    return rows


_ROW_COLUMNS = ["model", "image_id", "dsc", "jaccard", "precision", "recall", "specificity"]


def run_corruption_sweep(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Train at each missing-cell fraction, always testing on pristine GT."""
    runner = ExperimentRunner(config, out_dir)
    ds = runner.datasets[0]
    points = []
    rows = []
    for fraction in config.sweep_fractions:
        point = f"mc_{round(fraction * 1000):04d}"
        log.info("sweep-mc point %s (fraction=%.3f)", point, fraction)
        result = runner.corruption_point(point, ds, fraction, k_max=0)
        points.append(
            {
                "point": point,
                "fraction": fraction,
                "aggregate": result["aggregate"],
                "dsc_summary": result["dsc_summary"],
                "model": result["model"],
            }
        )
        rows.extend(_point_rows(point, result))
    summary = {
        "kind": "sweep-mc",
        "dataset": ds.ref.name,
        "config_hash": runner.cfg_hash,
        "points": points,
        "store": {"hits": runner.store.hits, "misses": runner.store.misses},
    }
    out = Path(out_dir)
    _write_results_csv(out / "results.csv", rows, _ROW_COLUMNS)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_underover_sweep(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Baseline (missing only) plus one model per kernel cap, all at the same
    missing fraction; reports all five metrics per row."""
    runner = ExperimentRunner(config, out_dir)
    ds = runner.datasets[0]
    base_fraction = config.uo_missing_fraction
    rows = []
    points = []

    def add_point(point: str, label: str, k_max: int, force_op: str | None = None):
        result = runner.corruption_point(point, ds, base_fraction, k_max, force_op)
        points.append(
            {
                "point": point,
                "label": label,
                "missing_fraction": base_fraction,
                "k_max": k_max,
                "aggregate": result["aggregate"],
                "dsc_summary": result["dsc_summary"],
                "model": result["model"],
            }
        )
        rows.extend(_point_rows(point, result))

    add_point(f"uo_base_{round(base_fraction * 1000):04d}", "baseline", 0)
    for k in config.kmax_values:
        add_point(f"uo_k{k}", f"{k}x{k}", k)
    summary = {
        "kind": "sweep-uo",
        "dataset": ds.ref.name,
        "config_hash": runner.cfg_hash,
        "points": points,
        "store": {"hits": runner.store.hits, "misses": runner.store.misses},
    }
    out = Path(out_dir)
    _write_results_csv(out / "results.csv", rows, _ROW_COLUMNS)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_transfer_experiment(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Single-tissue vs multi-tissue training, both evaluated on the second
    dataset's test split; emits per-metric deltas (single minus multi)."""
    if len(config.datasets) != 2:
        raise ValueError("transfer experiment needs exactly two datasets")
    runner = ExperimentRunner(config, out_dir)
    ds_a, ds_b = runner.datasets
    ch_a = ds_a.acquisitions[ds_a.ids("train")[0]].image.channels
    ch_b = ds_b.acquisitions[ds_b.ids("train")[0]].image.channels
    if ch_a != ch_b:
        raise ValueError(
            f"transfer needs a shared channel selection: {ds_a.ref.name} has "
            f"{ch_a} channels, {ds_b.ref.name} has {ch_b}"
        )
    rows = []
    levels = []
    for fraction in config.transfer_fractions:
        tag = f"{round(fraction * 1000):04d}"
        point_single = f"tr_{tag}_single"
        point_multi = f"tr_{tag}_multi"

        # single-tissue model: dataset A only
        a_train_imgs = runner.image_patches(ds_a, "train")
        a_val_imgs = runner.image_patches(ds_a, "val")
        a_train_tgts = runner.corrupted_targets(ds_a, "train", fraction, 0, point_single)
        a_val_tgts = (
            runner.corrupted_targets(ds_a, "val", fraction, 0, point_single)
            if config.corrupted_validation
            else runner.pristine_targets(ds_a, "val")
        )
        model_single = runner.train_model(
            point_single,
            ch_a,
            runner._flat(a_train_imgs, ds_a.ids("train")),
            runner._flat(a_train_tgts, ds_a.ids("train")),
            runner._flat(a_val_imgs, ds_a.ids("val")),
            runner._flat(a_val_tgts, ds_a.ids("val")),
        )

        # multi-tissue model: A and B training data together
        b_train_imgs = runner.image_patches(ds_b, "train")
        b_val_imgs = runner.image_patches(ds_b, "val")
        b_train_tgts = runner.corrupted_targets(ds_b, "train", fraction, 0, point_multi)
        b_val_tgts = (
            runner.corrupted_targets(ds_b, "val", fraction, 0, point_multi)
            if config.corrupted_validation
            else runner.pristine_targets(ds_b, "val")
        )
        model_multi = runner.train_model(
            point_multi,
            ch_a,
            runner._flat(a_train_imgs, ds_a.ids("train"))
            + runner._flat(b_train_imgs, ds_b.ids("train")),
            runner._flat(a_train_tgts, ds_a.ids("train"))
            + runner._flat(b_train_tgts, ds_b.ids("train")),
            runner._flat(a_val_imgs, ds_a.ids("val"))
            + runner._flat(b_val_imgs, ds_b.ids("val")),
            runner._flat(a_val_tgts, ds_a.ids("val"))
            + runner._flat(b_val_tgts, ds_b.ids("val")),
        )

        res_single = runner.evaluate_point(point_single, ds_b, model_single, ch_a)
        res_multi = runner.evaluate_point(point_multi, ds_b, model_multi, ch_a)
        rows.extend(_point_rows(point_single, res_single))
        rows.extend(_point_rows(point_multi, res_multi))
        deltas = {}
        for name in ("dsc", "jaccard", "precision", "recall", "specificity"):
            m_single = res_single["aggregate"][name]
            m_multi = res_multi["aggregate"][name]
            deltas[name] = {
                "m_single_tissue": m_single,
                "m_multi_tissue": m_multi,
                "delta": m_single - m_multi,
            }
        levels.append(
            {
                "fraction": fraction,
                "single_point": point_single,
                "multi_point": point_multi,
                "deltas": deltas,
            }
        )
    summary = {
        "kind": "transfer",
        "dataset_single": ds_a.ref.name,
        "dataset_multi": f"{ds_a.ref.name}+{ds_b.ref.name}",
        "eval_dataset": ds_b.ref.name,
        "config_hash": runner.cfg_hash,
        "levels": levels,
        "store": {"hits": runner.store.hits, "misses": runner.store.misses},
    }
    out = Path(out_dir)
    _write_results_csv(out / "results.csv", rows, _ROW_COLUMNS)
    delta_rows = []
    for level in levels:
        for name, d in level["deltas"].items():
            delta_rows.append(
                {
                    "fraction": level["fraction"],
                    "metric": name,
                    "m_single_tissue": d["m_single_tissue"],
                    "m_multi_tissue": d["m_multi_tissue"],
                    "delta": d["delta"],
                }
            )
    _write_results_csv(
        out / "deltas.csv",
        delta_rows,
        ["fraction", "metric", "m_single_tissue", "m_multi_tissue", "delta"],
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def run_bootstrap(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Self-training: start from heavily corrupted GT, repeatedly replace the
    training targets with the previous model's thresholded predictions.

    Validation targets stay at their iteration-0 corrupted state; test GT is
    pristine throughout.
    """
    runner = ExperimentRunner(config, out_dir)
    ds = runner.datasets[0]
    channels = ds.acquisitions[ds.ids("train")[0]].image.channels
    fraction = config.bootstrap.missing_fraction
    train_ids = ds.ids("train")

    train_imgs = runner.image_patches(ds, "train")
    val_imgs = runner.image_patches(ds, "val")
    base_point = "bootstrap_base"
    base_tgts = runner.corrupted_targets(ds, "train", fraction, 0, base_point)
    if config.corrupted_validation:
        val_tgts = runner.corrupted_targets(ds, "val", fraction, 0, base_point)
    else:
        val_tgts = runner.pristine_targets(ds, "val")

    trajectory = []
    rows = []
    current_tgts = base_tgts
    for iteration in range(0, config.bootstrap.iterations + 1):
        point = f"bootstrap_it{iteration:02d}"
        model = runner.train_model(
            point,
            channels,
            runner._flat(train_imgs, train_ids),
            runner._flat(current_tgts, train_ids),
            runner._flat(val_imgs, ds.ids("val")),
            runner._flat(val_tgts, ds.ids("val")),
        )
        result = runner.evaluate_point(point, ds, model, channels)
        trajectory.append(
            {
                "iteration": iteration,
                "point": point,
                "aggregate": result["aggregate"],
                "dsc_summary": result["dsc_summary"],
                "model": model,
            }
        )
        rows.extend(_point_rows(point, result))
        if iteration == config.bootstrap.iterations:
            break
        # inference on the full training set becomes the next round's targets
        preds = runner.predict_patches(
            f"{point}_selftrain", model, channels, train_imgs, train_ids
        )
        new_targets: dict[str, np.ndarray] = {}
        for acq_id in train_ids:
            prob = runner.reconstruct_probability(ds, acq_id, preds[acq_id])
            bits = (prob >= config.threshold).astype(np.uint8)
            if config.bootstrap.merge == "union":
                base_full = load_tensor(
                    Path(base_tgts[acq_id][0]).parent / f"{acq_id}_corrupted.sgt"
                )
                bits = np.maximum(bits, (base_full > 0).astype(np.uint8))
            new_targets[acq_id] = bits
        current_tgts = runner.write_binary_targets(
            "bootstrap-targets",
            {"cfg": runner.cfg_hash, "iteration": iteration + 1, "model": model},
            ds,
            new_targets,
            role="train",
            ops_note=[
                {"op": "bootstrap_predictions", "iteration": iteration + 1,
                 "threshold": config.threshold, "merge": config.bootstrap.merge}
            ],
        )

    dscs = [t["aggregate"]["dsc"] for t in trajectory]
    summary = {
        "kind": "bootstrap",
        "dataset": ds.ref.name,
        "config_hash": runner.cfg_hash,
        "missing_fraction": fraction,
        "iterations": config.bootstrap.iterations,
        "merge": config.bootstrap.merge,
        "trajectory": trajectory,
        "initial_dsc": dscs[0],
        "best_dsc": max(dscs),
        "best_iteration": int(np.argmax(dscs)),
        "final_dsc": dscs[-1],
        "total_gain": max(dscs) - dscs[0],
        "store": {"hits": runner.store.hits, "misses": runner.store.misses},
    }
    out = Path(out_dir)
    _write_results_csv(out / "results.csv", rows, _ROW_COLUMNS)
    traj_rows = [
        {"iteration": t["iteration"], "dsc": t["aggregate"]["dsc"],
         "jaccard": t["aggregate"]["jaccard"], "precision": t["aggregate"]["precision"],
         "recall": t["aggregate"]["recall"], "specificity": t["aggregate"]["specificity"]}
        for t in trajectory
    ]
    _write_results_csv(
        out / "trajectory.csv",
        traj_rows,
        ["iteration", "dsc", "jaccard", "precision", "recall", "specificity"],
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary
