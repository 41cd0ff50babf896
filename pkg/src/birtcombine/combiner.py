"""IRT-Multiregressor: turn validation errors into per-model intervals and vote on a band.

Steps: normalised per-band error matrix on the validation split, Beta-IRT fit,
fitted error expectations, one interval ``pred +/- expected_error * range`` per
model, reliability-weighted vote over canonical band scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .birt import EPSILON, BirtParams, FitConfig, ObservationMatrix, error_expectation, fit_birt
from .errors import InputError
from .scale import ScoreScale

RULES = ("argmax", "tiebreak_distance", "tiebreak_lower", "fallback")
# only produced with tiebreak="widest_last"
WIDTH_RULE = "tiebreak_width"
TIEBREAKS = ("distance", "widest_last")


@dataclass(frozen=True)
class PredictionMatrix:
    """Instances x models continuous predictions."""

    values: np.ndarray
    model_ids: tuple[str, ...]
    instance_ids: tuple[str, ...]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError("prediction matrix must be 2-D")
        mids = tuple(str(m) for m in self.model_ids)
        iids = tuple(str(i) for i in self.instance_ids)
        if v.shape != (len(iids), len(mids)):
            raise InputError(
                f"prediction values {v.shape} do not match {len(iids)} instances x {len(mids)} models"
            )
        if len(set(mids)) != len(mids):
            raise InputError("duplicate model ids in prediction matrix")
        if not np.all(np.isfinite(v)):
            raise InputError("prediction matrix contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "model_ids", mids)
        object.__setattr__(self, "instance_ids", iids)

    @property
    def n_models(self) -> int:
        return len(self.model_ids)

    def rows(self, idx) -> "PredictionMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return PredictionMatrix(self.values[idx], self.model_ids, tuple(self.instance_ids[i] for i in idx))

    def columns(self, model_ids: Sequence[str]) -> "PredictionMatrix":
        pos = {m: k for k, m in enumerate(self.model_ids)}
        missing = [m for m in model_ids if m not in pos]
        if missing:
            raise InputError(f"unknown model ids {missing}")
        cols = [pos[m] for m in model_ids]
        return PredictionMatrix(self.values[:, cols], tuple(model_ids), self.instance_ids)

    def hstack(self, other: "PredictionMatrix") -> "PredictionMatrix":
        if self.instance_ids != other.instance_ids:
            raise InputError("cannot join prediction matrices with different instance order")
        return PredictionMatrix(
            np.hstack([self.values, other.values]), self.model_ids + other.model_ids, self.instance_ids
        )


@dataclass(frozen=True)
class ErrorSummaryMatrix:
    """Bands x models mean absolute error over the scale range; NaN where a band had no essays."""

    values: np.ndarray
    support: np.ndarray
    scale: ScoreScale

    @property
    def missing(self) -> np.ndarray:
        return self.support == 0

    def observations(self) -> ObservationMatrix:
        return ObservationMatrix(np.where(self.missing, 0.5, self.values), ~self.missing)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise InputError(f"interval lower end {self.lo} above upper end {self.hi}")

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def build_error_matrix(
    val_preds: PredictionMatrix,
    val_gold: Sequence[float],
    scale: ScoreScale,
    epsilon: float = EPSILON,
) -> ErrorSummaryMatrix:
    gold = np.asarray(val_gold, dtype=float)
    if gold.ndim != 1 or gold.size != val_preds.values.shape[0]:
        raise InputError("validation gold scores do not align with the prediction rows")
    if gold.size == 0:
        raise InputError("validation set is empty")
    bands = scale.bands_of(gold)
    err = np.abs(val_preds.values - gold[:, None]) / scale.range
    B, M = scale.n_bands, val_preds.n_models
    values = np.full((B, M), np.nan)
    support = np.zeros((B, M), dtype=np.int64)
    for b in range(B):
        sel = bands == b
        n = int(sel.sum())
        if n:
            values[b] = np.clip(err[sel].mean(axis=0), epsilon, 1.0 - epsilon)
            support[b] = n
    return ErrorSummaryMatrix(values, support, scale)


def confidence_interval(
    pred: float, model_index: int, expected_errors: np.ndarray, scale: ScoreScale
) -> Interval:
    """Interval around ``pred`` sized by the model's expected error in its own predicted band."""
    b = scale.band_of(pred)
    half = float(expected_errors[b, model_index]) * scale.range
    return Interval(pred - half, pred + half)


@dataclass
class CombineResult:
    bands: np.ndarray
    scores: np.ndarray
    rules: list[str]
    audit: list[dict] = field(default_factory=list)

    @property
    def rule_counts(self) -> dict:
        return {r: self.rules.count(r) for r in sorted(set(self.rules))}


def combine(
    test_preds: PredictionMatrix,
    expected_errors: np.ndarray,
    scale: ScoreScale,
    extrapolated: np.ndarray | None = None,
    weighted: bool = True,
    tiebreak: str = "distance",
    audit: bool = True,
) -> CombineResult:
    """Select one band per instance by reliability-weighted interval voting.

    A model votes ``1 - e`` for every canonical band score inside its interval,
    where ``e`` is its expected error in the band it predicted. Ties go to the
    band nearest the weighted mean of the raw predictions, then to the lower
    band; if no interval covers any band score the weighted mean is banded.
    """
    ee = np.asarray(expected_errors, dtype=float)
    P = test_preds.values
    N, M = P.shape
    if M < 2:
        raise InputError("combination needs at least 2 models")
    if ee.shape != (scale.n_bands, M):
        raise InputError(
            f"expected errors shape {ee.shape} does not match {scale.n_bands} bands x {M} models"
        )
    if tiebreak not in TIEBREAKS:
        raise InputError(f"tiebreak must be one of {TIEBREAKS}")
    if N == 0:
        return CombineResult(np.zeros(0, np.int64), np.zeros(0), [], [])
    band_scores = np.asarray(scale.band_scores)
    cols = np.arange(M)
    pb = scale.bands_of(P)
    e = ee[pb, cols[None, :]]
    half = e * scale.range
    lo = P - half
    hi = P + half
    w = 1.0 - e if weighted else np.ones_like(e)
    votes = kernels.interval_votes(np.ascontiguousarray(lo), np.ascontiguousarray(hi),
                                   np.ascontiguousarray(w), band_scores)
    wmean = (w * P).sum(axis=1) / w.sum(axis=1)
    extra = None
    if extrapolated is not None:
        extra = np.asarray(extrapolated, dtype=bool)[pb, cols[None, :]].any(axis=1)

    out = np.empty(N, dtype=np.int64)
    rules: list[str] = []
    for n in range(N):
        v = votes[n]
        top = v.max()
        if top <= 0.0:
            out[n] = scale.band_of(wmean[n])
            rules.append("fallback")
            continue
        cand = np.flatnonzero(v == top)
        if cand.size == 1:
            out[n] = cand[0]
            rules.append("argmax")
            continue
        if tiebreak == "widest_last":
            key = np.array([
                half[n][(lo[n] <= band_scores[c]) & (band_scores[c] <= hi[n])].min() for c in cand
            ])
        else:
            key = np.abs(band_scores[cand] - wmean[n])
        near = cand[key == key.min()]
        if near.size == 1:
            out[n] = near[0]
            rules.append(WIDTH_RULE if tiebreak == "widest_last" else "tiebreak_distance")
        else:
            out[n] = near.min()
            rules.append("tiebreak_lower")

    records = []
    for n in range(N if audit else 0):
        rec = {
            "instance_id": test_preds.instance_ids[n],
            "predictions": dict(zip(test_preds.model_ids, map(float, P[n]))),
            "intervals": {m: [float(lo[n, j]), float(hi[n, j])] for j, m in enumerate(test_preds.model_ids)},
            "votes": {repr_score(s): float(v) for s, v in zip(band_scores, votes[n])},
            "weighted_mean": float(wmean[n]),
            "final_band": int(out[n]),
            "final_score": float(band_scores[out[n]]),
            "rule": rules[n],
        }
        if extra is not None:
            rec["extrapolated"] = bool(extra[n])
        records.append(rec)
    return CombineResult(out, band_scores[out], rules, records)


def repr_score(s: float) -> str:
    return str(int(s)) if float(s).is_integer() else repr(float(s))


@dataclass(frozen=True)
class FittedCombiner:
    """Everything learned from one validation split."""

    errors: ErrorSummaryMatrix
    params: BirtParams
    expected_errors: np.ndarray
    model_ids: tuple[str, ...]

    @property
    def extrapolated(self) -> np.ndarray:
        return self.errors.missing

    def combine(self, test_preds: PredictionMatrix, **kw) -> CombineResult:
        if tuple(test_preds.model_ids) != self.model_ids:
            test_preds = test_preds.columns(self.model_ids)
        return combine(test_preds, self.expected_errors, self.errors.scale, self.extrapolated, **kw)

    def to_dict(self) -> dict:
        err = self.errors
        return {
            "model_ids": list(self.model_ids),
            "scale": err.scale.to_dict(),
            "error_matrix": [[None if m else float(v) for v, m in zip(row, mrow)]
                             for row, mrow in zip(err.values, err.missing)],
            "support": err.support.tolist(),
            "expected_errors": self.expected_errors.tolist(),
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedCombiner":
        try:
            scale = ScoreScale.from_dict(data["scale"])
            values = np.array([[np.nan if v is None else v for v in row] for row in data["error_matrix"]],
                              dtype=float)
            errors = ErrorSummaryMatrix(values, np.array(data["support"], dtype=np.int64), scale)
            ee = np.array(data["expected_errors"], dtype=float)
            return cls(errors, BirtParams.from_dict(data["params"]), ee, tuple(data["model_ids"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed combiner file: {exc}") from None


def fit_combiner(
    val_preds: PredictionMatrix,
    val_gold: Sequence[float],
    scale: ScoreScale,
    config: FitConfig | None = None,
) -> FittedCombiner:
    config = config or FitConfig()
    errors = build_error_matrix(val_preds, val_gold, scale, config.epsilon)
    params = fit_birt(errors.observations(), config)
    return FittedCombiner(errors, params, error_expectation(params), val_preds.model_ids)
