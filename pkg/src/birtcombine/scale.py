"""Banded score scales and the continuous-to-band conversion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError

BUILTIN_SCALES = ("eebr", "bpne")


@dataclass(frozen=True)
class ScoreScale:
    """An ordered set of canonical band scores and the boundaries between them.

    A value ``v`` belongs to band ``i`` when ``thresholds[i-1] <= v < thresholds[i]``,
    with the first and last bands open towards -inf and +inf.
    """

    name: str
    band_scores: tuple[float, ...]
    thresholds: tuple[float, ...]

    def __post_init__(self):
        bs = tuple(float(b) for b in self.band_scores)
        th = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "band_scores", bs)
        object.__setattr__(self, "thresholds", th)
        if len(bs) < 2:
            raise InputError(f"scale {self.name!r} needs at least 2 bands")
        if len(th) != len(bs) - 1:
            raise InputError(
                f"scale {self.name!r}: expected {len(bs) - 1} thresholds, got {len(th)}"
            )
        if not all(math.isfinite(v) for v in bs + th):
            raise InputError(f"scale {self.name!r} has non-finite entries")
        if any(a <= b for b, a in zip(bs, bs[1:])):
            raise InputError(f"scale {self.name!r}: band_scores must strictly increase")
        if any(a <= b for b, a in zip(th, th[1:])):
            raise InputError(f"scale {self.name!r}: thresholds must strictly increase")
        for k, t in enumerate(th):
            # a threshold may coincide with the upper band score it opens
            if not (bs[k] < t <= bs[k + 1]):
                raise InputError(
                    f"scale {self.name!r}: threshold {t} not between bands {bs[k]} and {bs[k + 1]}"
                )

    @property
    def n_bands(self) -> int:
        return len(self.band_scores)

    @property
    def range(self) -> float:
        return self.band_scores[-1] - self.band_scores[0]

    def band_of(self, value: float) -> int:
        return band_of(value, self)

    def band_score(self, index: int) -> float:
        return band_score(index, self)

    def bands_of(self, values) -> np.ndarray:
        """Vectorised :func:`band_of` for an array of values."""
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InputError("cannot band non-finite values")
        return np.searchsorted(np.asarray(self.thresholds), v, side="right").astype(np.int64)

    def scores_of(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_bands):
            raise InputError("band index out of range")
        return np.asarray(self.band_scores)[idx]

    def scaled(self, factor: float) -> "ScoreScale":
        """Same scale with every score and threshold multiplied by ``factor > 0``."""
        if not factor > 0:
            raise InputError("scale factor must be positive")
        return ScoreScale(
            f"{self.name}*{factor:g}",
            tuple(b * factor for b in self.band_scores),
            tuple(t * factor for t in self.thresholds),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "band_scores": list(self.band_scores),
            "thresholds": list(self.thresholds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreScale":
        try:
            return cls(data["name"], tuple(data["band_scores"]), tuple(data["thresholds"]))
        except KeyError as exc:
            raise InputError(f"scale definition missing field {exc}") from None


def band_of(value: float, scale: ScoreScale) -> int:
    """Index of the band containing ``value``; bands are left-closed, right-open."""
    v = float(value)
    if not math.isfinite(v):
        raise InputError(f"cannot band non-finite value {value!r}")
    lo, hi = 0, len(scale.thresholds)
    while lo < hi:
        mid = (lo + hi) // 2
        if scale.thresholds[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def band_score(index: int, scale: ScoreScale) -> float:
    if not 0 <= index < scale.n_bands:
        raise InputError(f"band index {index} out of range for {scale.n_bands} bands")
    return scale.band_scores[index]


def load_scale(spec: str | Path) -> ScoreScale:
    """Resolve a built-in scale name or a path to a scale JSON file."""
    name = str(spec)
    if name.lower() in BUILTIN_SCALES:
        text = resources.files("birtcombine.data.scales").joinpath(f"{name.lower()}.json").read_text()
        return ScoreScale.from_dict(json.loads(text))
    path = Path(name)
    if not path.is_file():
        raise InputError(f"unknown scale {name!r}: not a built-in name and no such file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"scale file {path}: {exc}") from None
    return ScoreScale.from_dict(data)


def make_scale(name: str, band_scores: Sequence[float], thresholds: Sequence[float]) -> ScoreScale:
    return ScoreScale(name, tuple(band_scores), tuple(thresholds))
