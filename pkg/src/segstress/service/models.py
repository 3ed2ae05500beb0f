"""Request/response schemas for the workbench API."""
from __future__ import annotations

from pydantic import BaseModel, Field

from ..orchestrator.config import ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class SynthRequest(BaseModel):
    out_dir: str
    n_images: int = Field(default=200, ge=1)
    width: int = Field(default=128, ge=1)
    height: int = Field(default=128, ge=1)
    n_cells: int = Field(default=30, ge=0)
    radius_min: float = 3.0
    radius_max: float = 6.0
    contrast: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0
    name: str = "synthetic"


class SynthResponse(BaseModel):
    manifest_path: str
    n_images: int
    total_cells: int


class CorruptRequest(BaseModel):
    mask_in: str
    mask_out: str
    missing_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    k_max: int = 0
    seed: int = 0
    connectivity: int = 8
    relabel: bool = False  # run connected-component labelling first


class CorruptResponse(BaseModel):
    mask_out: str
    cells_before: int
    cells_after: int


class EvaluateRequest(BaseModel):
    pred_dir: str
    gt_dir: str
    out_csv: str
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)


class EvaluateResponse(BaseModel):
    out_csv: str
    n_images: int
    mean: dict[str, float]


class ReportRequest(BaseModel):
    results_dir: str
    out_dir: str


class ReportResponse(BaseModel):
    files: list[str]


class ValidateSegmenterRequest(BaseModel):
    cmd: list[str]
    workdir: str
    n_patches: int = 64
    channels: int = 6
    patch_size: int = 128
    epochs: int = 2
    seed: int = 0
    timeout_s: float = 3600.0


class ValidateSegmenterResponse(BaseModel):
    ok: bool
    report: dict


class ExperimentRequest(BaseModel):
    config: ExperimentConfig
    out_dir: str


class JobInfo(BaseModel):
    job_id: str
    kind: str
    state: str  # queued | running | done | failed
    out_dir: str
    error: str | None = None
    summary: dict | None = None
