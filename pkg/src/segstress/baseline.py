"""Built-in per-pixel linear segmenter.

Features per pixel: each channel raw, its 3x3 box mean, its 5x5 box mean
(zero-padded borders), plus a bias, so F = 3*C + 1.  Probability is the
sigmoid of the linear response; training is minibatch Adam on batch-level
soft-Dice loss, with the returned weights taken from the epoch with the
best validation DSC (ties go to the earlier epoch).  Everything is
deterministic given the seed: zero weight init and seeded shuffles.

This model trains in seconds on a CPU and has a checkable analytic
gradient, which makes it the default harness for every corruption
experiment; heavier architectures plug in through the same segmenter
protocol.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .metrics import soft_dice_loss
from .rng import fisher_yates, stream
from .types import MultiChannelImage, ProbabilityMask

MODEL_MAGIC = b"SGM1"


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 64
    epochs: int = 20
    eps_dice: float = 1.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    threshold: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class PixelModel:
    weights: np.ndarray  # (F,) float64
    trained_channels: int
    version: str = "segstress-baseline/1"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if w.size != 3 * self.trained_channels + 1:
            raise ValueError(
                f"{w.size} weights inconsistent with C={self.trained_channels}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


def featurize(image) -> np.ndarray:
    """(H, W, 3*C + 1) float32 feature stack for an image or raw (H, W, C) array."""
    px = image.pixels if isinstance(image, MultiChannelImage) else np.asarray(image)
    if px.ndim == 2:
        px = px[:, :, None]
    h, w, c = px.shape
    feats = np.empty((h, w, 3 * c + 1), dtype=np.float32)
    px32 = px.astype(np.float32, copy=False)
    for ch in range(c):
        plane = px32[:, :, ch]
        feats[:, :, 3 * ch] = plane
        feats[:, :, 3 * ch + 1] = ndimage.uniform_filter(plane, size=3, mode="constant")
        feats[:, :, 3 * ch + 2] = ndimage.uniform_filter(plane, size=5, mode="constant")
    feats[:, :, -1] = 1.0
    return feats


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_from_features(weights: np.ndarray, feats: np.ndarray) -> np.ndarray:
    """Sigmoid of the linear response; accepts (H, W, F) or flat (n, F)."""
    z = feats.reshape(-1, feats.shape[-1]).astype(np.float64) @ weights
    return _sigmoid(z).reshape(feats.shape[:-1])


def predict(model: PixelModel, image) -> ProbabilityMask:
    """Per-pixel foreground probability, sigmoid(w . features)."""
    px = image.pixels if isinstance(image, MultiChannelImage) else np.asarray(image)
    if px.ndim == 2:
        px = px[:, :, None]
    if px.shape[2] != model.trained_channels:
        raise ValueError(
            f"image has {px.shape[2]} channels, model trained on "
            f"{model.trained_channels}"
        )
    probs = predict_from_features(model.weights, featurize(px))
    # float32 storage may round saturated probabilities to exactly 0 or 1
    return ProbabilityMask(values=probs.astype(np.float32))


def adam_update(
    weights: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    config: TrainConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Adam step (t counts from 1); returns (weights', m', v')."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    m = config.beta1 * m + (1.0 - config.beta1) * grad
    v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    weights = weights - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return weights, m, v


def batch_objective(
    weights: np.ndarray,
    feats: np.ndarray,
    targets: np.ndarray,
    eps: float,
) -> tuple[float, np.ndarray]:
    """Soft-Dice loss over one batch of pixels and its gradient w.r.t. weights.

    feats: (n, F) float; targets: (n,) in {0,1}.  Double precision.
    """
    x = feats.astype(np.float64, copy=False)
    g = targets.astype(np.float64, copy=False)
    z = x @ weights
    p = _sigmoid(z)
    loss, dloss_dp = soft_dice_loss(p[None, :], g[None, :], eps=eps)
    dloss_dz = dloss_dp[0] * p * (1.0 - p)
    grad_w = x.T @ dloss_dz
    return loss, grad_w


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_dsc: float


def _pooled_val_dsc(
    weights: np.ndarray, val_feats: list[np.ndarray], val_targets: list[np.ndarray],
    threshold: float,
) -> float:
    tp = fp = fn = 0
    for feats, target in zip(val_feats, val_targets):
        p = predict_from_features(weights, feats)
        pred = p >= threshold
        g = target.astype(bool)
        tp += int(np.count_nonzero(pred & g))
        fp += int(np.count_nonzero(pred & ~g))
        fn += int(np.count_nonzero(~pred & g))
    if 2 * tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def train(
    train_pairs: list[tuple[np.ndarray, np.ndarray]],
    val_pairs: list[tuple[np.ndarray, np.ndarray]],
    config: TrainConfig = TrainConfig(),
) -> tuple[PixelModel, list[EpochRecord]]:
    """Fit the linear model on (image patch, binary target) pairs.

    Patches are (p, p, C) float arrays, targets (p, p) {0,1}.  Validation
    DSC is pooled over all validation patches at the configured threshold;
    the returned weights come from the epoch maximizing it.
    """
    if not train_pairs or not val_pairs:
        raise ValueError("train and validation sets must both be non-empty")
    channels = np.asarray(train_pairs[0][0]).shape[2]
    f_dim = 3 * channels + 1

    train_feats = [
        featurize(img).reshape(-1, f_dim) for img, _ in train_pairs
    ]
    train_targets = [
        (np.asarray(t) != 0).astype(np.uint8).reshape(-1) for _, t in train_pairs
    ]
    val_feats = [featurize(img).reshape(-1, f_dim) for img, _ in val_pairs]
    val_targets = [
        (np.asarray(t) != 0).astype(np.uint8).reshape(-1) for _, t in val_pairs
    ]

    weights = np.zeros(f_dim, dtype=np.float64)
    m = np.zeros_like(weights)
    v = np.zeros_like(weights)
    t_step = 0
    history: list[EpochRecord] = []
    best_weights = weights.copy()
    best_dsc = -1.0

    for epoch in range(1, config.epochs + 1):
        order = fisher_yates(list(range(len(train_pairs))), stream(config.seed, "epoch", epoch))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            x = np.concatenate([train_feats[i] for i in batch_idx], axis=0)
            g = np.concatenate([train_targets[i] for i in batch_idx], axis=0)
            loss, grad_w = batch_objective(weights, x, g, config.eps_dice)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, start // config.batch_size, loss)
            t_step += 1
            weights, m, v = adam_update(weights, grad_w, m, v, t_step, config)
            epoch_losses.append(loss)
        val_dsc = _pooled_val_dsc(weights, val_feats, val_targets, config.threshold)
        history.append(
            EpochRecord(epoch=epoch, train_loss=float(np.mean(epoch_losses)), val_dsc=val_dsc)
        )
        if val_dsc > best_dsc:
            best_dsc = val_dsc
            best_weights = weights.copy()

    model = PixelModel(weights=best_weights, trained_channels=channels)
    return model, history


def save_model(path: str | Path, model: PixelModel) -> None:
    """SGM1 | u32 C | u32 F | F little-endian float64 weights."""
    f = model.weights.size
    blob = MODEL_MAGIC + struct.pack("<II", model.trained_channels, f)
    blob += model.weights.astype("<f8").tobytes()
    Path(path).write_bytes(blob)


def load_model(path: str | Path) -> PixelModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: bad model magic {raw[:4]!r}")
    c, f = struct.unpack_from("<II", raw, 4)
    expected = 12 + 8 * f
    if len(raw) != expected:
        raise ValueError(f"{path}: model file holds {len(raw)} bytes, expected {expected}")
    weights = np.frombuffer(raw, dtype="<f8", count=f, offset=12).astype(np.float64)
    return PixelModel(weights=weights, trained_channels=c)
