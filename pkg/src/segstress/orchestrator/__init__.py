from .config import ExperimentConfig, DatasetRef, load_config
from .experiments import (
    run_bootstrap,
    run_corruption_sweep,
    run_transfer_experiment,
    run_underover_sweep,
)
from .protocol import (
    SegmenterError,
    SegmenterExitError,
    SegmenterManifest,
    SegmenterOutputError,
    SegmenterTimeoutError,
    invoke_segmenter,
    validate_segmenter,
)
from .store import ArtifactStore, MaskProvenance

__all__ = [
    "ExperimentConfig",
    "DatasetRef",
    "load_config",
    "run_corruption_sweep",
    "run_underover_sweep",
    "run_transfer_experiment",
    "run_bootstrap",
    "SegmenterManifest",
    "SegmenterError",
    "SegmenterExitError",
    "SegmenterOutputError",
    "SegmenterTimeoutError",
    "invoke_segmenter",
    "validate_segmenter",
    "ArtifactStore",
    "MaskProvenance",
]
