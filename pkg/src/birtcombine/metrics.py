"""Agreement and correlation metrics with their interpretation labels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, UndefinedMetricError

WEIGHTINGS = ("none", "linear", "quadratic")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows indexed by the gold band and columns by the predicted band."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InputError("confusion counts must be a square table")
        if (c < 0).any():
            raise InputError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion(gold: Sequence[int], pred: Sequence[int], k: int) -> ConfusionMatrix:
    g = np.asarray(gold, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if g.ndim != 1 or g.shape != p.shape:
        raise InputError(f"gold and pred lengths differ ({g.size} vs {p.size})")
    if g.size == 0:
        raise InputError("cannot build a confusion matrix from empty sequences")
    if k < 1:
        raise InputError("band count must be positive")
    if g.min() < 0 or p.min() < 0 or g.max() >= k or p.max() >= k:
        raise InputError(f"band index outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (g, p), 1)
    return ConfusionMatrix(counts)


def weight_matrix(k: int, weighting: str) -> np.ndarray:
    """Disagreement weights: 0/1, |i-j|/(k-1) or (i-j)^2/(k-1)^2."""
    if weighting not in WEIGHTINGS:
        raise InputError(f"unknown weighting {weighting!r}; choose one of {WEIGHTINGS}")
    if k < 2:
        raise InputError("weighted kappa needs at least 2 bands")
    i = np.arange(k)
    diff = np.abs(i[:, None] - i[None, :]).astype(float)
    if weighting == "none":
        return (diff > 0).astype(float)
    if weighting == "linear":
        return diff / (k - 1)
    return diff**2 / (k - 1) ** 2


def kappa(cm: ConfusionMatrix, weighting: str = "none") -> float:
    """Cohen's kappa, optionally linearly or quadratically weighted."""
    counts = cm.counts
    total = counts.sum()
    if total <= 0:
        raise InputError("kappa needs at least one scored instance")
    w = weight_matrix(cm.k, weighting)
    observed = counts / total
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    num = float((w * observed).sum())
    if num == 0.0:
        return 1.0
    den = float((w * expected).sum())
    if den == 0.0:
        raise UndefinedMetricError("kappa undefined: zero expected disagreement")
    return 1.0 - num / den


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise InputError("pearson needs two sequences of equal length")
    if a.size < 2:
        raise InputError("pearson needs at least two observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("pearson inputs must be finite")
    # test constancy directly: a - a.mean() need not be exactly zero for constant input
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise UndefinedMetricError("pearson undefined for a constant sequence")
    da = a - a.mean()
    db = b - b.mean()
    r = float(da @ db) / math.sqrt(float(da @ da) * float(db @ db))
    return min(1.0, max(-1.0, r))


def interpret_kappa(value: float) -> str:
    """Landis-Koch style label, upper edges inclusive."""
    if value <= 0.20:
        return "low"
    if value <= 0.40:
        return "fair"
    if value <= 0.60:
        return "moderate"
    if value <= 0.80:
        return "good"
    return "very_high"


def interpret_pearson(r: float) -> str:
    """Strength of a correlation plus its direction, e.g. ``"moderate positive"``."""
    mag = abs(r)
    if mag == 0.0:
        return "none"
    if mag >= 1.0:
        strength = "perfect"
    elif mag <= 0.3:
        strength = "weak"
    elif mag <= 0.7:
        strength = "moderate"
    else:
        strength = "strong"
    return f"{strength} {'positive' if r > 0 else 'negative'}"


def _or_none(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def metric_report(
    gold_bands: Sequence[int],
    pred_bands: Sequence[int],
    k: int,
    gold_scores: Sequence[float],
    pred_scores: Sequence[float],
) -> dict:
    """The JSON report fragment; undefined metrics are ``None``."""
    cm = confusion(gold_bands, pred_bands, k)
    out = {
        "kappa_none": _or_none(kappa, cm, "none"),
        "kappa_linear": _or_none(kappa, cm, "linear"),
        "qwk": _or_none(kappa, cm, "quadratic"),
        "pearson": _or_none(pearson, gold_scores, pred_scores),
        "confusion": cm.tolist(),
    }
    out["kappa_label"] = None if out["kappa_none"] is None else interpret_kappa(out["kappa_none"])
    out["pearson_label"] = None if out["pearson"] is None else interpret_pearson(out["pearson"])
    return out
