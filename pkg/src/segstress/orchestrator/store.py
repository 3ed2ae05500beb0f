"""Content-addressed stage store and mask provenance tags.

Every experiment stage writes its artifacts under a directory keyed by
the SHA-256 of (stage name, canonical parameter JSON).  A stage that
finds its completion marker simply returns the recorded outputs, which
makes whole experiments resumable and re-runs no-ops.  Distinct keys may
be written concurrently; a key is only ever produced by one (stage,
params) pair.

Mask artifacts carry a provenance sidecar (<file>.prov.json) recording
the source acquisition, the split role, and every corruption applied.
The orchestrator refuses to evaluate against a test mask whose sidecar
shows corruption; tests inspect the same tags.
"""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path


def _canonical(params: dict) -> str:
    return json.dumps(params, sort_keys=True, separators=(",", ":"))


def stage_key(stage: str, params: dict) -> str:
    digest = hashlib.sha256(f"{stage}\0{_canonical(params)}".encode()).hexdigest()
    return digest[:24]


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def stage_dir(self, stage: str, params: dict) -> Path:
        return self.root / f"{stage}-{stage_key(stage, params)}"

    def run_stage(self, stage: str, params: dict, producer) -> dict:
        """Run `producer(stage_dir) -> outputs dict` unless already complete."""
        sdir = self.stage_dir(stage, params)
        marker = sdir / "_complete.json"
        if marker.exists():
            self.hits += 1
            return json.loads(marker.read_text())["outputs"]
        self.misses += 1
        sdir.mkdir(parents=True, exist_ok=True)
        outputs = producer(sdir)
        marker.write_text(
            json.dumps(
                {
                    "stage": stage,
                    "params": params,
                    "completed_at": time.time(),
                    "outputs": outputs,
                },
                indent=2,
                sort_keys=True,
            )
        )
        return outputs


class MaskProvenance:
    """Sidecar reader/writer for mask artifacts."""

    @staticmethod
    def sidecar(mask_path: str | Path) -> Path:
        p = Path(mask_path)
        return p.with_name(p.name + ".prov.json")

    @staticmethod
    def write(mask_path: str | Path, source: str, role: str, ops: list[dict]) -> None:
        MaskProvenance.sidecar(mask_path).write_text(
            json.dumps({"source": source, "role": role, "ops": ops}, indent=2)
        )

    @staticmethod
    def read(mask_path: str | Path) -> dict:
        return json.loads(MaskProvenance.sidecar(mask_path).read_text())

    @staticmethod
    def is_corrupted(mask_path: str | Path) -> bool:
        ops = MaskProvenance.read(mask_path)["ops"]
        return any(op["op"] in ("erase_cells", "resegment_cells") for op in ops)

    @staticmethod
    def assert_pristine(mask_path: str | Path, role: str = "test") -> None:
        prov = MaskProvenance.read(mask_path)
        corrupted = any(
            op["op"] in ("erase_cells", "resegment_cells") for op in prov["ops"]
        )
        if corrupted:
            raise RuntimeError(
                f"{mask_path}: {role} mask carries corruption ops {prov['ops']}; "
                "evaluation against corrupted reference is forbidden"
            )
