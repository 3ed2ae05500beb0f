"""Load acquisitions, select channels, normalize intensities, split datasets.

Dataset manifests are JSON files of the form

    {"name": ..., "channel_names": [...],
     "acquisitions": [{"id": ..., "image": ..., "mask": ..., "stratum": ...}]}

with raster paths relative to the manifest.  Rasters may be portable
tensor files (.sgt) or multi-page TIFFs (.tif/.tiff).  Acquisitions whose
image and mask dimensions disagree are rejected at load time with a
warning, not an abort.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import fisher_yates, stream
from .tensorfile import load_tensor
from .tiff import load_tiff
from .types import BinaryMask, InstanceMask, MultiChannelImage, ProbabilityMask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Acquisition:
    id: str
    image: MultiChannelImage
    gt_mask: InstanceMask
    stratum: str = ""

    def __post_init__(self):
        if (self.image.height, self.image.width) != (
            self.gt_mask.height,
            self.gt_mask.width,
        ):
            raise ValueError(
                f"{self.id}: image {self.image.width}x{self.image.height} vs "
                f"mask {self.gt_mask.width}x{self.gt_mask.height}"
            )


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    ratios: tuple[float, float, float]

    def __post_init__(self):
        buckets = (set(self.train), set(self.val), set(self.test))
        total = len(self.train) + len(self.val) + len(self.test)
        if len(buckets[0] | buckets[1] | buckets[2]) != total:
            raise ValueError("split buckets overlap")

    def bucket_of(self, acq_id: str) -> str:
        if acq_id in self.train:
            return "train"
        if acq_id in self.val:
            return "val"
        if acq_id in self.test:
            return "test"
        raise KeyError(acq_id)


def load_tensor_file(path: str | Path):
    """Load an .sgt raster as the matching domain type.

    3D float32 -> MultiChannelImage (synthetic channel names), 2D uint32 ->
    InstanceMask, 2D uint8 -> BinaryMask, 2D float32 -> ProbabilityMask.
    """
    arr = load_tensor(path)
    if arr.ndim == 3 and arr.dtype == np.float32:
        names = tuple(f"ch{i}" for i in range(arr.shape[2]))
        return MultiChannelImage(pixels=arr, channel_names=names)
    if arr.ndim == 2 and arr.dtype == np.uint32:
        return InstanceMask(labels=arr)
    if arr.ndim == 2 and arr.dtype == np.uint8:
        return BinaryMask(bits=arr)
    if arr.ndim == 2 and arr.dtype == np.float32:
        return ProbabilityMask(values=arr)
    raise ValueError(f"{path}: no domain type for ndim={arr.ndim} dtype={arr.dtype}")


def load_raster(path: str | Path):
    p = Path(path)
    if p.suffix.lower() in (".tif", ".tiff"):
        return load_tiff(p)
    return load_tensor_file(p)


def select_channels(image: MultiChannelImage, names: list[str]) -> MultiChannelImage:
    """Reorder/subset channels by name; repeated requests bind to successive
    source channels carrying that name, in source order."""
    pools: dict[str, list[int]] = {}
    for idx, name in enumerate(image.channel_names):
        pools.setdefault(name, []).append(idx)
    taken: dict[str, int] = {}
    indices = []
    for name in names:
        if name not in pools:
            raise KeyError(f"channel {name!r} not in image ({list(image.channel_names)})")
        used = taken.get(name, 0)
        if used >= len(pools[name]):
            raise KeyError(
                f"channel {name!r} requested {used + 1} times but source has "
                f"only {len(pools[name])}"
            )
        indices.append(pools[name][used])
        taken[name] = used + 1
    return MultiChannelImage(
        pixels=image.pixels[:, :, indices],
        channel_names=tuple(names),
        resolution_um=image.resolution_um,
    )


def percentile_normalize(image: MultiChannelImage, q: float = 99.0) -> MultiChannelImage:
    """Divide each channel by its q-th percentile (linear interpolation at
    rank (n-1)*q/100).  A channel whose percentile is 0 comes out all-zero;
    values above the percentile stay > 1 (no clipping)."""
    if not 0.0 < q <= 100.0:
        raise ValueError(f"percentile {q} not in (0, 100]")
    px = image.pixels.astype(np.float32, copy=True)
    for c in range(px.shape[2]):
        p = float(np.percentile(px[:, :, c], q))
        if p == 0.0:
            px[:, :, c] = 0.0
        else:
            px[:, :, c] /= p
    return MultiChannelImage(
        pixels=px, channel_names=image.channel_names, resolution_um=image.resolution_um
    )


def _apportion(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder apportionment; ties break by bucket order."""
    quotas = [n * r for r in ratios]
    counts = [int(np.floor(qt)) for qt in quotas]
    remainders = [qt - ct for qt, ct in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in range(leftover):
        counts[order[i % 3]] += 1
    return tuple(counts)  # type: ignore[return-value]


def split_dataset(
    acquisitions,
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
    seed: int = 0,
    stratified: bool = False,
) -> DatasetSplit:
    """Split by acquisition (never by patch) into train/val/test.

    Stratified mode shuffles and apportions each stratum independently with
    the same ratios.  Deterministic in (ids, seed).
    """
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    pairs = []
    for a in acquisitions:
        if isinstance(a, Acquisition):
            pairs.append((a.id, a.stratum))
        elif isinstance(a, str):
            pairs.append((a, ""))
        else:
            acq_id, stratum = a
            pairs.append((str(acq_id), str(stratum)))
    if not pairs:
        raise ValueError("cannot split an empty dataset")
    if len({p[0] for p in pairs}) != len(pairs):
        raise ValueError("duplicate acquisition ids")

    groups: dict[str, list[str]] = {}
    for acq_id, stratum in pairs:
        groups.setdefault(stratum if stratified else "", []).append(acq_id)

    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    for stratum in sorted(groups):
        ids = sorted(groups[stratum])
        shuffled = fisher_yates(ids, stream(seed, "split", stratum))
        n_train, n_val, n_test = _apportion(len(ids), tuple(ratios))
        train += shuffled[:n_train]
        val += shuffled[n_train : n_train + n_val]
        test += shuffled[n_train + n_val :]
    return DatasetSplit(
        train=tuple(train), val=tuple(val), test=tuple(test), ratios=tuple(ratios)
    )


def load_dataset(manifest_path: str | Path) -> tuple[dict, list[Acquisition]]:
    """Load every acquisition listed in a dataset manifest.

    Returns (manifest dict, acquisitions); entries with mismatched image and
    mask dimensions are dropped with a warning.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    names = manifest.get("channel_names")
    out = []
    for entry in manifest["acquisitions"]:
        image = load_raster(base / entry["image"])
        if not isinstance(image, MultiChannelImage):
            raise ValueError(f"{entry['image']} is not a multi-channel image")
        if names and len(names) == image.channels:
            image = MultiChannelImage(
                pixels=image.pixels,
                channel_names=tuple(names),
                resolution_um=image.resolution_um,
            )
        mask = load_raster(base / entry["mask"])
        if isinstance(mask, BinaryMask):
            mask = InstanceMask(labels=mask.bits.astype(np.uint32))
        if not isinstance(mask, InstanceMask):
            raise ValueError(f"{entry['mask']} is not an instance mask")
        if (image.height, image.width) != (mask.height, mask.width):
            log.warning(
                "rejecting acquisition %s: image %dx%d vs mask %dx%d",
                entry["id"], image.width, image.height, mask.width, mask.height,
            )
            continue
        out.append(
            Acquisition(
                id=str(entry["id"]),
                image=image,
                gt_mask=mask,
                stratum=str(entry.get("stratum", "")),
            )
        )
    return manifest, out


def load_channel_config(path: str | Path) -> dict[str, list[str]]:
    """JSON mapping dataset name -> ordered channel-name list."""
    cfg = json.loads(Path(path).read_text())
    if not isinstance(cfg, dict) or not all(
        isinstance(v, list) and all(isinstance(s, str) for s in v) for v in cfg.values()
    ):
        raise ValueError("channel config must map dataset name -> list of channel names")
    return cfg
