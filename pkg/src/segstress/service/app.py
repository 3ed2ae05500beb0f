"""FastAPI application wrapping the core package.

Fast operations run synchronously; the four experiment families run as
background jobs polled via /jobs/{id}.  The CLI is a thin client of this
API, either over the network or through an in-process transport.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..corruption import corrupt as corrupt_mask
from ..corruption import relabel_components
from ..ingest import load_tensor_file
from ..metrics import aggregate_reports, evaluate_pair, threshold
from ..orchestrator.experiments import (
    run_bootstrap,
    run_corruption_sweep,
    run_transfer_experiment,
    run_underover_sweep,
)
from ..orchestrator.protocol import SegmenterError, validate_segmenter
from ..report import render_results
from ..synthgen import SynthConfig, generate_dataset
from ..tensorfile import save_tensor
from ..types import BinaryMask, CorruptionSpec, InstanceMask, ProbabilityMask, binarize
from .jobs import JobRegistry
from .models import (
    CorruptRequest,
    CorruptResponse,
    EvaluateRequest,
    EvaluateResponse,
    ExperimentRequest,
    HealthResponse,
    JobInfo,
    ReportRequest,
    ReportResponse,
    SynthRequest,
    SynthResponse,
    ValidateSegmenterRequest,
    ValidateSegmenterResponse,
)

EXPERIMENT_RUNNERS = {
    "sweep-mc": run_corruption_sweep,
    "sweep-uo": run_underover_sweep,
    "transfer": run_transfer_experiment,
    "bootstrap": run_bootstrap,
}


def create_app() -> FastAPI:
    app = FastAPI(title="segstress", version=__version__)
    jobs = JobRegistry()
    app.state.jobs = jobs

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/synth/generate", response_model=SynthResponse)
    def synth(req: SynthRequest):
        config = SynthConfig(
            width=req.width,
            height=req.height,
            n_cells=req.n_cells,
            radius_min=req.radius_min,
            radius_max=req.radius_max,
            contrast=req.contrast,
            noise_sigma=req.noise_sigma,
            seed=req.seed,
        )
        manifest_path = generate_dataset(req.out_dir, req.n_images, config, name=req.name)
        manifest = json.loads(Path(manifest_path).read_text())
        return SynthResponse(
            manifest_path=str(manifest_path),
            n_images=req.n_images,
            total_cells=manifest["generator"]["total_cells"],
        )

    @app.post("/corruption/apply", response_model=CorruptResponse)
    def apply_corruption(req: CorruptRequest):
        loaded = load_tensor_file(req.mask_in)
        if isinstance(loaded, BinaryMask):
            mask = relabel_components(loaded, req.connectivity)
        elif isinstance(loaded, InstanceMask):
            mask = relabel_components(loaded, req.connectivity) if req.relabel else loaded
        else:
            raise HTTPException(422, f"{req.mask_in} is not a mask tensor")
        spec = CorruptionSpec(
            missing_fraction=req.missing_fraction, k_max=req.k_max, seed=req.seed
        )
        out = corrupt_mask(mask, spec)
        Path(req.mask_out).parent.mkdir(parents=True, exist_ok=True)
        save_tensor(req.mask_out, out.labels)
        return CorruptResponse(
            mask_out=req.mask_out,
            cells_before=mask.num_cells,
            cells_after=out.num_cells,
        )

    @app.post("/metrics/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        pred_dir = Path(req.pred_dir)
        gt_dir = Path(req.gt_dir)
        pred_files = sorted(pred_dir.glob("*.sgt"))
        if not pred_files:
            raise HTTPException(422, f"no .sgt files in {pred_dir}")
        rows = []
        reports = []
        for pf in pred_files:
            gf = gt_dir / pf.name
            if not gf.exists():
                raise HTTPException(422, f"missing ground truth for {pf.name}")
            pred = load_tensor_file(pf)
            gt = load_tensor_file(gf)
            if isinstance(pred, ProbabilityMask):
                pred = threshold(pred, req.threshold)
            elif isinstance(pred, InstanceMask):
                pred = binarize(pred)
            if isinstance(gt, InstanceMask):
                gt = binarize(gt)
            elif isinstance(gt, ProbabilityMask):
                gt = threshold(gt, req.threshold)
            report = evaluate_pair(pred, gt)
            reports.append(report)
            rows.append({"image": pf.name, **report.as_dict()})
        mean = aggregate_reports(reports, "mean")
        out_csv = Path(req.out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="") as fh:
            field_names = ["image", "tp", "fp", "fn", "tn", *mean.keys()]
            writer = csv.DictWriter(fh, fieldnames=field_names)
            writer.writeheader()
            writer.writerows(rows)
            writer.writerow({"image": "__summary_mean__", **{k: v for k, v in mean.items()}})
        return EvaluateResponse(out_csv=str(out_csv), n_images=len(rows), mean=mean)

    @app.post("/report/render", response_model=ReportResponse)
    def report(req: ReportRequest):
        try:
            files = render_results(req.results_dir, req.out_dir)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(422, str(exc)) from exc
        return ReportResponse(files=[str(f) for f in files])

    @app.post("/segmenters/validate", response_model=ValidateSegmenterResponse)
    def validate(req: ValidateSegmenterRequest):
        try:
            report = validate_segmenter(
                req.cmd,
                req.workdir,
                n_patches=req.n_patches,
                channels=req.channels,
                patch_size=req.patch_size,
                epochs=req.epochs,
                seed=req.seed,
                timeout_s=req.timeout_s,
            )
        except SegmenterError as exc:
            return ValidateSegmenterResponse(ok=False, report={"error": str(exc)})
        return ValidateSegmenterResponse(ok=True, report=report)

    @app.post("/experiments/{kind}", response_model=JobInfo)
    def submit_experiment(kind: str, req: ExperimentRequest):
        runner = EXPERIMENT_RUNNERS.get(kind)
        if runner is None:
            raise HTTPException(404, f"unknown experiment kind {kind!r}")
        job = jobs.submit(kind, req.out_dir, lambda: runner(req.config, req.out_dir))
        return JobInfo(**job.snapshot())

    @app.get("/jobs", response_model=list[JobInfo])
    def list_jobs():
        return [JobInfo(**j.snapshot()) for j in jobs.all()]

    @app.get("/jobs/{job_id}", response_model=JobInfo)
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no job {job_id}")
        return JobInfo(**job.snapshot())

    return app
