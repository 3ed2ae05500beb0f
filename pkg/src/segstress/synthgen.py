"""Synthetic multi-channel microscopy images with exact instance masks.

Cells are random ellipses placed by rejection sampling with at least one
pixel of separation, so connected-component labelling recovers exactly
the generated instances.  Channel roles mirror a typical biomarker panel:
two nuclear channels peaking at cell centers, two cytoplasm channels
filling cell bodies (one sharing its name with the other, as duplicated
panel rows do occur), and two stromal channels carrying background
texture.  Nuclear brightness varies per cell, so corruption experiments
have a dim-cell subpopulation to lose.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .rng import derive_seed, stream
from .tensorfile import save_tensor
from .types import InstanceMask, MultiChannelImage

log = logging.getLogger(__name__)

CHANNEL_NAMES = ("DNA1", "DNA2", "Vimentin", "Vimentin", "Collagen1", "Collagen2")
NUCLEAR = (0, 1)
CYTOPLASM = (2, 3)
STROMAL = (4, 5)

# Per-cell nuclear brightness factor range and radial profile floor; fixed so
# that summed nuclear+cytoplasm signal always exceeds the image midpoint
# inside cells when noise is off (min inside = 2c + 2*0.4*0.2c = 2.16c > 2c).
_BRIGHTNESS_LO = 0.2
_PROFILE_FLOOR = 0.4


@dataclass(frozen=True)
class SynthConfig:
    width: int = 128
    height: int = 128
    n_cells: int = 30
    radius_min: float = 3.0
    radius_max: float = 6.0
    contrast: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image must have positive area")
        if self.radius_min > self.radius_max:
            raise ValueError("radius_min must be <= radius_max")
        if self.n_cells < 0 or self.noise_sigma < 0:
            raise ValueError("n_cells and noise_sigma must be >= 0")


@dataclass(frozen=True)
class _Ellipse:
    cy: float
    cx: float
    a: float
    b: float
    theta: float


def _ellipse_rho(e: _Ellipse, h: int, w: int):
    """Normalized squared ellipse metric over the clipped bbox.

    Returns (rho2 array, (r0, c0)); pixels with rho2 <= 1 are inside.
    """
    margin = max(e.a, e.b) + 1.0
    r0 = max(0, int(np.floor(e.cy - margin)))
    r1 = min(h, int(np.ceil(e.cy + margin)) + 1)
    c0 = max(0, int(np.floor(e.cx - margin)))
    c1 = min(w, int(np.ceil(e.cx + margin)) + 1)
    yy, xx = np.mgrid[r0:r1, c0:c1]
    dy = yy - e.cy
    dx = xx - e.cx
    u = dx * np.cos(e.theta) + dy * np.sin(e.theta)
    v = -dx * np.sin(e.theta) + dy * np.cos(e.theta)
    rho2 = (u / e.a) ** 2 + (v / e.b) ** 2
    return rho2, (r0, c0)


def _bilinear_field(rng, h: int, w: int, scale: int = 8) -> np.ndarray:
    """Smooth [0, 1] texture: coarse uniform grid, bilinear upsample."""
    gh = h // scale + 2
    gw = w // scale + 2
    coarse = rng.random((gh, gw))
    ys = np.arange(h) / scale
    xs = np.arange(w) / scale
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    tl = coarse[np.ix_(y0, x0)]
    tr = coarse[np.ix_(y0, x0 + 1)]
    bl = coarse[np.ix_(y0 + 1, x0)]
    br = coarse[np.ix_(y0 + 1, x0 + 1)]
    return (
        tl * (1 - fy) * (1 - fx)
        + tr * (1 - fy) * fx
        + bl * fy * (1 - fx)
        + br * fy * fx
    )


def generate(config: SynthConfig) -> tuple[MultiChannelImage, InstanceMask]:
    """One synthetic acquisition: (image, instance mask), labels 1..n_placed."""
    h, w = config.height, config.width
    rng = stream(config.seed, "synth")

    labels = np.zeros((h, w), dtype=np.uint32)
    blocked = np.zeros((h, w), dtype=bool)  # foreground plus its 8-neighborhood
    placed: list[_Ellipse] = []
    attempts_left = 100 * config.n_cells
    while len(placed) < config.n_cells and attempts_left > 0:
        attempts_left -= 1
        e = _Ellipse(
            cy=float(rng.uniform(0, h)),
            cx=float(rng.uniform(0, w)),
            a=float(rng.uniform(config.radius_min, config.radius_max)),
            b=float(rng.uniform(config.radius_min, config.radius_max)),
            theta=float(rng.uniform(0, np.pi)),
        )
        rho2, (r0, c0) = _ellipse_rho(e, h, w)
        inside = rho2 <= 1.0
        if not inside.any():
            continue
        rr, cc = np.nonzero(inside)
        rr = rr + r0
        cc = cc + c0
        if blocked[rr, cc].any():
            continue
        placed.append(e)
        labels[rr, cc] = len(placed)
        lo_r = max(0, rr.min() - 1)
        hi_r = min(h, rr.max() + 2)
        lo_c = max(0, cc.min() - 1)
        hi_c = min(w, cc.max() + 2)
        region = labels[lo_r:hi_r, lo_c:hi_c] == len(placed)
        grown = np.zeros_like(region)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                src = region[
                    max(0, -dy) : region.shape[0] - max(0, dy),
                    max(0, -dx) : region.shape[1] - max(0, dx),
                ]
                grown[
                    max(0, dy) : grown.shape[0] - max(0, -dy),
                    max(0, dx) : grown.shape[1] - max(0, -dx),
                ] |= src
        blocked[lo_r:hi_r, lo_c:hi_c] |= grown

    if len(placed) < config.n_cells:
        log.warning(
            "placed %d of %d requested cells (field too crowded)",
            len(placed), config.n_cells,
        )

    brightness = _BRIGHTNESS_LO + (1.0 - _BRIGHTNESS_LO) * rng.random(len(placed))

    img = np.zeros((h, w, len(CHANNEL_NAMES)), dtype=np.float64)
    for idx, e in enumerate(placed):
        cid = idx + 1
        rho2, (r0, c0) = _ellipse_rho(e, h, w)
        own = labels[r0 : r0 + rho2.shape[0], c0 : c0 + rho2.shape[1]] == cid
        rho = np.sqrt(np.clip(rho2, 0.0, 1.0))
        profile = _PROFILE_FLOOR + (1.0 - _PROFILE_FLOOR) * (1.0 - rho)
        nuclear = config.contrast * brightness[idx] * profile * own
        for ch in NUCLEAR:
            img[r0 : r0 + rho2.shape[0], c0 : c0 + rho2.shape[1], ch] += nuclear
        for ch in CYTOPLASM:
            img[r0 : r0 + rho2.shape[0], c0 : c0 + rho2.shape[1], ch] += (
                config.contrast * own
            )

    background = labels == 0
    for ch in STROMAL:
        texture = _bilinear_field(rng, h, w)
        img[:, :, ch] = 0.5 * config.contrast * texture * background

    if config.noise_sigma > 0:
        img += rng.normal(0.0, config.noise_sigma, img.shape)
    np.maximum(img, 0.0, out=img)

    image = MultiChannelImage(
        pixels=img.astype(np.float32), channel_names=CHANNEL_NAMES
    )
    return image, InstanceMask(labels=labels)


def generate_dataset(
    out_dir: str | Path,
    n_images: int,
    config: SynthConfig,
    name: str = "synthetic",
) -> Path:
    """Write n_images acquisitions plus a dataset manifest; returns its path.

    Image i is generated with a seed derived from (config.seed, "image", i),
    so any single image is reproducible in isolation.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    total_cells = 0
    for i in range(n_images):
        cfg_i = replace(config, seed=derive_seed(config.seed, "image", i))
        image, mask = generate(cfg_i)
        acq_id = f"{name}_{i:04d}"
        img_rel = f"images/{acq_id}.sgt"
        mask_rel = f"masks/{acq_id}.sgt"
        save_tensor(out / img_rel, image.pixels)
        save_tensor(out / mask_rel, mask.labels)
        total_cells += mask.num_cells
        entries.append({"id": acq_id, "image": img_rel, "mask": mask_rel, "stratum": ""})
    manifest = {
        "name": name,
        "channel_names": list(CHANNEL_NAMES),
        "generator": {
            "n_images": n_images,
            "width": config.width,
            "height": config.height,
            "n_cells": config.n_cells,
            "radius_min": config.radius_min,
            "radius_max": config.radius_max,
            "contrast": config.contrast,
            "noise_sigma": config.noise_sigma,
            "seed": config.seed,
            "total_cells": total_cells,
        },
        "acquisitions": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
