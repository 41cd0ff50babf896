"""Synthetic corpora and synthetic Beta-IRT matrices with known ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..birt import EPSILON, ObservationMatrix, icc_expectation
from ..combiner import PredictionMatrix
from ..errors import InputError
from ..io import write_gold, write_predictions
from ..regressors import derive_seed
from ..scale import ScoreScale, load_scale

# share of essays per band, in percent
PRESETS: dict[str, tuple[float, ...]] = {
    "eebr": (3.14, 0.99, 13.39, 37.41, 27.75, 17.32),
    "bpne": (3.24, 15.14, 66.72, 12.71, 2.19),
}

# monotone, hence invertible, transforms of the normalised gold score u in [0, 1]
_TRANSFORMS = (
    lambda u: u,
    lambda u: u * u,
    lambda u: np.exp(u),
    lambda u: np.log1p(3.0 * u),
    lambda u: np.tanh(2.0 * u - 1.0),
    lambda u: np.sqrt(u + 0.1),
)


def band_counts(n: int, proportions) -> list[int]:
    """Largest-remainder apportionment of ``n`` items; ties go to the lower band."""
    p = np.asarray(proportions, dtype=float)
    if p.size == 0:
        raise InputError("band list is empty")
    if np.any(p < 0) or p.sum() <= 0:
        raise InputError("band proportions must be non-negative and not all zero")
    quota = n * p / p.sum()
    counts = np.floor(quota).astype(int)
    rest = n - int(counts.sum())
    order = sorted(range(p.size), key=lambda b: (-(quota[b] - counts[b]), b))
    for b in order[:rest]:
        counts[b] += 1
    return counts.tolist()


@dataclass(frozen=True)
class ModelProfile:
    """Prediction = gold + bias(band) + N(0, sd(band)^2); both keyed by band score."""

    sd: float | dict = 10.0
    bias: float | dict = 0.0

    def _lookup(self, value, scores: np.ndarray) -> np.ndarray:
        if isinstance(value, Mapping):
            table = {float(k): float(v) for k, v in value.items()}
            unknown = set(table) - set(map(float, scores))
            if unknown:
                raise InputError(f"profile refers to scores not on the scale: {sorted(unknown)}")
            return np.array([table.get(float(s), 0.0) for s in scores])
        return np.full(scores.size, float(value))

    def sample(self, gold: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        sd = self._lookup(self.sd, gold)
        if np.any(sd < 0):
            raise InputError("profile sd must be non-negative")
        return gold + self._lookup(self.bias, gold) + sd * rng.standard_normal(gold.size)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelProfile":
        unknown = set(data) - {"sd", "bias"}
        if unknown:
            raise InputError(f"unknown profile keys {sorted(unknown)}")
        return cls(data.get("sd", 10.0), data.get("bias", 0.0))


@dataclass(frozen=True)
class SynthCorpusConfig:
    scale: str = "eebr"
    n: int = 1000
    preset: str | None = "eebr"
    counts: tuple[int, ...] | None = None
    n_informative: int = 6
    n_distractors: int = 4
    feature_noise: float = 0.05
    models: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict | None) -> "SynthCorpusConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown synth settings: {sorted(unknown)}")
        if data.get("counts") is not None:
            data["counts"] = tuple(int(c) for c in data["counts"])
        return cls(**data)


@dataclass(frozen=True)
class SynthCorpus:
    ids: tuple[str, ...]
    gold: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...]
    predictions: PredictionMatrix | None
    scale: ScoreScale

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"features": out / "features.csv", "gold": out / "gold.csv"}
        with open(paths["features"], "w") as fh:
            fh.write(",".join(["instance_id", *self.feature_names, "score"]) + "\n")
            for iid, row, g in zip(self.ids, self.X, self.gold):
                fh.write(",".join([iid, *(repr(float(x)) for x in row), repr(float(g))]) + "\n")
        write_gold(self.ids, self.gold, paths["gold"])
        if self.predictions is not None:
            paths["predictions"] = out / "predictions.csv"
            write_predictions(self.predictions, paths["predictions"])
        return paths


def synth_corpus(config: SynthCorpusConfig | dict | None = None) -> SynthCorpus:
    cfg = config if isinstance(config, SynthCorpusConfig) else SynthCorpusConfig.from_dict(config)
    scale = cfg.scale if isinstance(cfg.scale, ScoreScale) else load_scale(cfg.scale)
    if cfg.counts is not None:
        counts = list(cfg.counts)
        if len(counts) != scale.n_bands:
            raise InputError(f"counts need one entry per band ({scale.n_bands})")
    else:
        if cfg.preset is None:
            props = [1.0] * scale.n_bands
        elif cfg.preset not in PRESETS:
            raise InputError(f"unknown preset {cfg.preset!r}; choose from {sorted(PRESETS)}")
        else:
            props = PRESETS[cfg.preset]
        if len(props) != scale.n_bands:
            raise InputError(f"preset {cfg.preset!r} does not fit scale {scale.name!r}")
        counts = band_counts(cfg.n, props)
    if not counts or sum(counts) == 0:
        raise InputError("synthetic corpus has no bands to draw from")
    if any(c < 0 for c in counts):
        raise InputError("band counts must be non-negative")
    if cfg.n_informative < 1 or cfg.n_distractors < 0:
        raise InputError("need at least one informative feature")

    rng = np.random.default_rng(derive_seed(cfg.seed, "gold"))
    gold = rng.permutation(np.repeat(np.asarray(scale.band_scores, dtype=float), counts))
    n = gold.size
    width = len(str(n - 1))
    ids = tuple(f"e{i:0{width}d}" for i in range(n))
    u = (gold - scale.band_scores[0]) / scale.range

    frng = np.random.default_rng(derive_seed(cfg.seed, "features"))
    cols, names = [], []
    for j in range(cfg.n_informative):
        cols.append(_TRANSFORMS[j % len(_TRANSFORMS)](u) + cfg.feature_noise * frng.standard_normal(n))
        names.append(f"f{j}")
    for j in range(cfg.n_distractors):
        cols.append(frng.standard_normal(n))
        names.append(f"noise{j}")
    X = np.column_stack(cols)

    preds = None
    if cfg.models:
        vals = []
        for name, prof in cfg.models.items():
            profile = prof if isinstance(prof, ModelProfile) else ModelProfile.from_dict(prof)
            # one stream per model name so adding a model never perturbs the others
            vals.append(profile.sample(gold, np.random.default_rng(derive_seed(cfg.seed, "model", name))))
        preds = PredictionMatrix(np.column_stack(vals), tuple(cfg.models), ids)
    return SynthCorpus(ids, gold, X, tuple(names), preds, scale)


@dataclass(frozen=True)
class BirtTruth:
    theta: np.ndarray
    delta: np.ndarray
    a: np.ndarray

    def expectation(self) -> np.ndarray:
        return icc_expectation(self.theta[None, :], self.delta[:, None], self.a[:, None])

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "delta": self.delta.tolist(), "a": self.a.tolist()}


def synth_birt_matrix(
    B: int,
    M: int,
    seed: int = 0,
    noise: str = "none",
    samples_per_cell: int = 1,
    a=None,
    epsilon: float = EPSILON,
) -> tuple[ObservationMatrix, BirtTruth]:
    """Draw item/respondent parameters and the matrix they imply.

    ``noise="beta"`` averages ``samples_per_cell`` draws from
    Beta((theta/delta)^a, ((1-theta)/(1-delta))^a), whose mean is exactly the
    expectation curve. ``a`` overrides the sampled discriminations.
    """
    if B < 2 or M < 2:
        raise InputError("need at least 2 items and 2 respondents")
    if noise not in ("none", "beta"):
        raise InputError("noise must be 'none' or 'beta'")
    if samples_per_cell < 1:
        raise InputError("samples_per_cell must be at least 1")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, 0.95, M)
    delta = rng.uniform(0.05, 0.95, B)
    if a is None:
        a = np.empty(B)
        for i in range(B):
            v = 0.0
            while abs(v) < 0.2:
                v = rng.uniform(-3.0, 3.0)
            a[i] = v
    else:
        a = np.asarray(a, dtype=float)
        if a.shape != (B,):
            raise InputError(f"a must have {B} entries")
    truth = BirtTruth(theta, delta, a)
    if noise == "none":
        values = truth.expectation()
    else:
        alpha = (theta[None, :] / delta[:, None]) ** a[:, None]
        beta = ((1 - theta[None, :]) / (1 - delta[:, None])) ** a[:, None]
        draws = rng.beta(alpha[..., None], beta[..., None], size=(B, M, samples_per_cell))
        values = draws.mean(axis=2)
    return ObservationMatrix.from_array(values, epsilon=epsilon), truth
