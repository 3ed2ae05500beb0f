"""Experiment configuration (the JSON the CLI and service consume)."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, Field, model_validator

DEFAULT_SWEEP = (0.0, 0.01, 0.02, 0.05, 0.10, 0.20, 0.25, 0.50, 0.75, 0.80, 0.85, 0.90, 0.95)
DEFAULT_KMAX = (3, 5, 7, 9)
DEFAULT_TRANSFER = (0.0, 0.10, 0.50, 0.90)


class DatasetRef(BaseModel):
    name: str
    manifest: str
    channels: list[str] | None = None  # None: all channels in manifest order
    stratified: bool = False


class BootstrapSettings(BaseModel):
    missing_fraction: float = Field(default=0.95, ge=0.0, le=1.0)
    iterations: int = Field(default=10, ge=1)
    merge: str = Field(default="replace", pattern="^(replace|union)$")


class SegmenterSettings(BaseModel):
    cmd: list[str] = ["segstress-baseline"]
    timeout_s: float = 3600.0
    epochs: int | None = None
    learning_rate: float | None = None
    batch_size: int | None = None


class ExperimentConfig(BaseModel):
    datasets: list[DatasetRef]
    channel_config: str | None = None  # optional JSON file, dataset name -> channels
    sweep_fractions: list[float] = list(DEFAULT_SWEEP)
    kmax_values: list[int] = list(DEFAULT_KMAX)
    uo_missing_fraction: float = Field(default=0.50, ge=0.0, le=1.0)
    transfer_fractions: list[float] = list(DEFAULT_TRANSFER)
    bootstrap: BootstrapSettings = BootstrapSettings()
    segmenter: SegmenterSettings = SegmenterSettings()
    split_ratios: tuple[float, float, float] = (0.70, 0.10, 0.20)
    normalize_percentile: float = Field(default=99.0, gt=0.0, le=100.0)
    patch_size: int = Field(default=128, ge=1)
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    connectivity: int = Field(default=8)
    seed: int = 0
    corrupted_validation: bool = True
    eval_aggregate: str = Field(default="mean", pattern="^(mean|pooled)$")

    @model_validator(mode="after")
    def _check(self):
        if not 1 <= len(self.datasets) <= 2:
            raise ValueError("config needs one or two datasets")
        if any(not 0.0 <= f <= 1.0 for f in self.sweep_fractions):
            raise ValueError("sweep fractions must lie in [0, 1]")
        if any(k not in (0, 3, 5, 7, 9) for k in self.kmax_values):
            raise ValueError("kmax values must come from {0, 3, 5, 7, 9}")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        return self

    def config_hash(self) -> str:
        blob = self.model_dump_json()
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | Path) -> ExperimentConfig:
    cfg = ExperimentConfig.model_validate_json(Path(path).read_text())
    if cfg.channel_config:
        channel_map = json.loads(Path(cfg.channel_config).read_text())
        for ds in cfg.datasets:
            if ds.channels is None and ds.name in channel_map:
                ds.channels = list(channel_map[ds.name])
    return cfg
