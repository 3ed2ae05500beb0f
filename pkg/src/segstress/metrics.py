"""Pixel-wise confusion counts, overlap metrics, soft-Dice loss, summaries.

Conventions fixed here and used everywhere else:
  * any 0/0 metric denominator yields 1.0 (empty prediction of an empty
    target is perfect) so background-only images cannot poison aggregates;
  * thresholding uses >= t;
  * per-image metrics are computed on reconstructed full-size masks and
    aggregated as the mean over images (pooled-pixel aggregation exists
    behind a flag for sensitivity checks).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import BinaryMask, MetricsReport, ProbabilityMask


def _bits(mask) -> np.ndarray:
    if isinstance(mask, BinaryMask):
        return mask.bits
    return (np.asarray(mask) != 0).astype(np.uint8)


def confusion(pred, gt) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) pixel counts for a predicted vs reference binary mask."""
    p = _bits(pred)
    g = _bits(gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    p = p.astype(bool)
    g = g.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return tp, fp, fn, tn


def _ratio(num: int, den: int) -> float:
    if den == 0:
        return 1.0
    return num / den


def compute_metrics(counts: tuple[int, int, int, int]) -> MetricsReport:
    tp, fp, fn, tn = (int(c) for c in counts)
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        dsc=_ratio(2 * tp, 2 * tp + fp + fn),
        jaccard=_ratio(tp, tp + fp + fn),
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
    )


def evaluate_pair(pred, gt) -> MetricsReport:
    return compute_metrics(confusion(pred, gt))


def soft_dice_loss(pred, gt, eps: float = 1.0) -> tuple[float, np.ndarray]:
    """Soft Dice loss and its analytic per-pixel gradient.

    loss = 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps), computed in
    float64.  Returns (loss, dloss/dp) with the gradient shaped like pred.
    """
    p = np.asarray(pred.values if isinstance(pred, ProbabilityMask) else pred,
                   dtype=np.float64)
    g = _bits(gt).astype(np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    num = 2.0 * float(np.sum(p * g)) + eps
    den = float(np.sum(p)) + float(np.sum(g)) + eps
    loss = 1.0 - num / den
    grad = -(2.0 * g * den - num) / (den * den)
    return loss, grad


def threshold(pred, t: float = 0.5) -> BinaryMask:
    """Binarize probabilities: bit = 1 iff value >= t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold {t} not in [0, 1]")
    v = np.asarray(pred.values if isinstance(pred, ProbabilityMask) else pred)
    return BinaryMask(bits=(v >= t))


@dataclass(frozen=True)
class SummaryStats:
    """Five-number summary plus mean and 1.5*IQR whiskers, for boxplots."""

    n: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    whisker_low: float
    whisker_high: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "min": self.min,
            "max": self.max,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
        }


def summarize(values) -> SummaryStats:
    """Quartiles by linear interpolation at rank (n-1)*q; whiskers reach the
    most extreme points still within 1.5*IQR of the quartile."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size == 0:
        raise ValueError("cannot summarize an empty list")
    q1, med, q3 = (float(q) for q in np.percentile(vals, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    # quartiles are interpolated, so at least the points equal to them remain
    whisker_low = float(inside.min()) if inside.size else q1
    whisker_high = float(inside.max()) if inside.size else q3
    return SummaryStats(
        n=int(vals.size),
        mean=float(vals.mean()),
        median=med,
        q1=q1,
        q3=q3,
        min=float(vals.min()),
        max=float(vals.max()),
        whisker_low=whisker_low,
        whisker_high=whisker_high,
    )


def aggregate_reports(reports: list[MetricsReport], mode: str = "mean") -> dict:
    """Mean-over-images (canonical) or pooled-pixel aggregate of the five metrics."""
    if not reports:
        raise ValueError("no reports to aggregate")
    if mode == "mean":
        return {
            name: float(np.mean([getattr(r, name) for r in reports]))
            for name in ("dsc", "jaccard", "precision", "recall", "specificity")
        }
    if mode == "pooled":
        totals = np.sum([r.counts() for r in reports], axis=0)
        pooled = compute_metrics(tuple(int(t) for t in totals))
        return {
            name: getattr(pooled, name)
            for name in ("dsc", "jaccard", "precision", "recall", "specificity")
        }
    raise ValueError(f"unknown aggregation mode {mode!r}")
