"""Cross-validated experiment: regressors, imported systems, voting baselines and IRT combination."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..birt import FitConfig, ability_report
from ..combiner import TIEBREAKS, PredictionMatrix, fit_combiner
from ..errors import InputError, NumericError
from ..features import ConnectiveLexicon, FeatureConfig, featurize_corpus, read_corpus, read_feature_csv
from ..features.corpus import FeatureMatrix
from ..io import align, read_predictions
from ..metrics import metric_report
from ..regressors import RegressorSpec, derive_seed, load_roster, parse_roster, predict, train
from ..scale import ScoreScale, load_scale
from .folds import FoldPlan, plan_folds

VARIANTS = ("traditional", "imported", "all")
METRICS = ("kappa_none", "kappa_linear", "qwk", "pearson")
PEARSON_BASIS = {
    "regressor": "continuous predictions",
    "imported": "continuous predictions",
    "voting": "continuous predictions (mean of members)",
    "irt": "canonical band scores",
}


@dataclass(frozen=True)
class ExperimentConfig:
    features: str | None = None
    corpus: str | None = None
    lexicon: str | None = None
    feature_config: dict = field(default_factory=dict)
    scale: str = "eebr"
    roster: dict | str = field(default_factory=dict)
    imported: tuple = ()
    folds: int = 10
    validation_fraction: float = 0.1
    fit: dict = field(default_factory=dict)
    combine: dict = field(default_factory=dict)
    variants: tuple[str, ...] = VARIANTS
    seed: int = 0
    workers: int = 1
    notes: str = ""

    def __post_init__(self):
        bad = set(self.variants) - set(VARIANTS)
        if bad:
            raise InputError(f"unknown IRT variants {sorted(bad)}; choose from {VARIANTS}")
        unknown = set(self.combine) - {"weighted", "tiebreak"}
        if unknown:
            raise InputError(f"unknown combine settings {sorted(unknown)}")
        if self.combine.get("tiebreak", "distance") not in TIEBREAKS:
            raise InputError(f"tiebreak must be one of {TIEBREAKS}")
        if self.workers < 1:
            raise InputError("workers must be at least 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "ExperimentConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown experiment settings: {sorted(unknown)}")
        base = Path(base_dir) if base_dir is not None else None

        def resolve(p):
            if p is None or base is None or Path(p).is_absolute():
                return p
            return str(base / p)

        for key in ("features", "corpus", "lexicon"):
            if key in data:
                data[key] = resolve(data[key])
        if isinstance(data.get("roster"), str):
            data["roster"] = resolve(data["roster"])
        if isinstance(data.get("scale"), str) and data["scale"].endswith(".json"):
            data["scale"] = resolve(data["scale"])
        imported = []
        for item in data.get("imported", ()):
            item = {"path": item} if isinstance(item, str) else dict(item)
            item["path"] = resolve(item["path"])
            imported.append(item)
        data["imported"] = tuple(imported)
        if "variants" in data:
            data["variants"] = tuple(data["variants"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["imported"] = [dict(i) for i in self.imported]
        out["variants"] = list(self.variants)
        return out


@dataclass
class ExperimentReport:
    data: dict
    audits: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    def table(self) -> str:
        rows = [("system", "kappa", "qwk", "pearson", "folds")]
        agg = self.data["aggregate"]
        for name in self.data["systems"]:
            a = agg[name]
            cells = []
            for m in ("kappa_none", "qwk", "pearson"):
                s = a[m]
                cells.append("n/a" if s["mean"] is None else f"{s['mean']:.3f} ({s['sd']:.3f})")
            n = f"{a['completed_folds']}/{self.data['k']}"
            rows.append((name, *cells, n))
        widths = [max(len(r[c]) for r in rows) for c in range(5)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _summary(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "sd": None, "n": 0}
    arr = np.array(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "sd": sd, "n": int(arr.size)}


def aggregate(folds: list[dict], systems: list[str]) -> dict:
    """Mean and sample sd of each metric over the folds where the system produced output."""
    out = {}
    for name in systems:
        entries = [f["metrics"][name] for f in folds if name in f["metrics"]]
        agg = {m: _summary([e[m] for e in entries if e[m] is not None]) for m in METRICS}
        agg["completed_folds"] = len(entries)
        agg["failed_folds"] = sum(1 for f in folds if name in f.get("failed", {}))
        out[name] = agg
    return out


def _score(gold: np.ndarray, pred: np.ndarray, scale: ScoreScale) -> dict:
    return metric_report(scale.bands_of(gold), scale.bands_of(pred), scale.n_bands, gold, pred)


@dataclass(frozen=True)
class _FoldJob:
    fold: int
    fit_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    X: np.ndarray
    y: np.ndarray
    ids: tuple[str, ...]
    roster: dict
    imported: PredictionMatrix | None
    scale: ScoreScale
    fit: FitConfig
    combine: dict
    variants: tuple[str, ...]
    seed: int


def _run_fold(job: _FoldJob) -> tuple[dict, list[dict]]:
    y = job.y
    ids = job.ids
    val_ids = tuple(ids[i] for i in job.val_idx)
    test_ids = tuple(ids[i] for i in job.test_idx)
    metrics: dict[str, dict] = {}
    val_cols, test_cols = [], []
    fold_seed = derive_seed(job.seed, "fold", job.fold)
    for mid, spec in job.roster.items():
        model = train(spec, job.X[job.fit_idx], y[job.fit_idx], derive_seed(fold_seed, "model", mid))
        val_cols.append(predict(model, job.X[job.val_idx]))
        test_cols.append(predict(model, job.X[job.test_idx]))
        metrics[mid] = _score(y[job.test_idx], test_cols[-1], job.scale)
    roster_ids = tuple(job.roster)
    pm_val = pm_test = None
    if roster_ids:
        pm_val = PredictionMatrix(np.column_stack(val_cols), roster_ids, val_ids)
        pm_test = PredictionMatrix(np.column_stack(test_cols), roster_ids, test_ids)
    imp_val = imp_test = None
    if job.imported is not None:
        imp_val = job.imported.rows(job.val_idx)
        imp_test = job.imported.rows(job.test_idx)
        for j, mid in enumerate(job.imported.model_ids):
            metrics[mid] = _score(y[job.test_idx], imp_test.values[:, j], job.scale)

    groups = {
        "traditional": (pm_val, pm_test),
        "imported": (imp_val, imp_test),
        "all": (pm_val.hstack(imp_val), pm_test.hstack(imp_test)) if pm_val and imp_val else (None, None),
    }
    irt, failed, audits = {}, {}, []
    for variant in job.variants:
        val, test = groups[variant]
        if val is None or val.n_models < 2:
            continue
        vote = test.values.mean(axis=1)
        metrics[f"voting[{variant}]"] = _score(y[job.test_idx], vote, job.scale)
        name = f"irt[{variant}]"
        try:
            fc = fit_combiner(val, y[job.val_idx], job.scale, job.fit)
        except NumericError as exc:
            failed[name] = {"error": str(exc), "iteration": getattr(exc, "iteration", None)}
            irt[variant] = {"status": "failed", **failed[name]}
            continue
        res = fc.combine(test, **job.combine)
        metrics[name] = _score(y[job.test_idx], res.scores, job.scale)
        extra = sum(1 for r in res.audit if r.get("extrapolated"))
        irt[variant] = {
            "status": "ok",
            "models": list(val.model_ids),
            "params": fc.params.to_dict(),
            "abilities": ability_report(fc.params, val.model_ids, [str(s) for s in job.scale.band_scores]),
            "error_matrix": fc.to_dict()["error_matrix"],
            "expected_errors": fc.expected_errors.tolist(),
            "extrapolated_cells": int(fc.extrapolated.sum()),
            "extrapolated_decisions": extra,
            "rule_counts": res.rule_counts,
        }
        for rec in res.audit:
            audits.append({"fold": job.fold, "variant": variant, **rec})
    entry = {
        "fold": job.fold,
        "seed": fold_seed,
        "n_fit": int(job.fit_idx.size),
        "n_validation": int(job.val_idx.size),
        "n_test": int(job.test_idx.size),
        "metrics": metrics,
        "irt": irt,
        "failed": failed,
    }
    return entry, audits


def load_features(cfg: ExperimentConfig) -> FeatureMatrix:
    if cfg.features and cfg.corpus:
        raise InputError("give either 'features' or 'corpus', not both")
    if cfg.features:
        return read_feature_csv(cfg.features)
    if cfg.corpus:
        table = featurize_corpus(read_corpus(cfg.corpus), ConnectiveLexicon.load(cfg.lexicon),
                                 FeatureConfig.from_dict(cfg.feature_config))
        return FeatureMatrix(table.ids, table.registry.names, table.matrix, table.scores)
    raise InputError("config needs 'features' (CSV) or 'corpus' (JSONL)")


def load_imported(cfg: ExperimentConfig, ids: tuple[str, ...]) -> PredictionMatrix | None:
    joined = None
    for item in cfg.imported:
        pm = align(read_predictions(item["path"]), ids, source=str(item["path"]))
        joined = pm if joined is None else joined.hstack(pm)
    return joined


def run_experiment(config: ExperimentConfig | dict) -> ExperimentReport:
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    data = load_features(cfg)
    return run_on_data(cfg, data, load_imported(cfg, data.ids))


def run_on_data(cfg: ExperimentConfig, data: FeatureMatrix, imported: PredictionMatrix | None = None
                ) -> ExperimentReport:
    scale = load_scale(cfg.scale)
    roster = load_roster(cfg.roster) if isinstance(cfg.roster, str) else (
        parse_roster(cfg.roster) if cfg.roster else {})
    if not all(isinstance(v, RegressorSpec) for v in roster.values()):
        raise InputError("roster entries must be regressor specs")
    if imported is not None:
        imported = align(imported, data.ids, source="imported predictions")
        clash = set(roster) & set(imported.model_ids)
        if clash:
            raise InputError(f"model ids used by both roster and imported predictions: {sorted(clash)}")
    if not roster and imported is None:
        raise InputError("nothing to evaluate: roster and imported predictions are both empty")
    fit = FitConfig.from_dict(cfg.fit)
    gold_bands = scale.bands_of(data.y)
    plan: FoldPlan = plan_folds(gold_bands, cfg.folds, cfg.validation_fraction, cfg.seed)

    jobs = [
        _FoldJob(f, plan.fit(f), plan.validation[f], plan.test(f), data.X, data.y, data.ids, roster,
                 imported, scale, fit, dict(cfg.combine), cfg.variants, cfg.seed)
        for f in range(plan.k)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(min(cfg.workers, plan.k)) as ex:
            results = list(ex.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    folds = [r[0] for r in results]
    audits = [a for r in results for a in r[1]]

    systems: list[str] = list(roster) + (list(imported.model_ids) if imported is not None else [])
    kinds = {m: "regressor" for m in roster}
    kinds.update({m: "imported" for m in (imported.model_ids if imported is not None else ())})
    for v in VARIANTS:
        for prefix in ("voting", "irt"):
            name = f"{prefix}[{v}]"
            if any(name in f["metrics"] or name in f["failed"] for f in folds):
                systems.append(name)
                kinds[name] = prefix

    report = {
        "seed": cfg.seed,
        "k": plan.k,
        "n_instances": len(data.ids),
        "scale": scale.to_dict(),
        # worker count is an execution detail and must not change the report bytes
        "config": {k: v for k, v in cfg.to_dict().items() if k != "workers"},
        "notes": cfg.notes,
        "provenance": {str(i["path"]): i.get("note", "") for i in cfg.imported},
        "sparse_bands": list(plan.sparse_bands),
        "systems": systems,
        "system_kinds": kinds,
        "pearson_basis": PEARSON_BASIS,
        "folds": folds,
        "aggregate": aggregate(folds, systems),
        "extrapolated_decisions": {
            v: sum(f["irt"][v].get("extrapolated_decisions", 0) for f in folds if v in f["irt"])
            for v in VARIANTS if any(v in f["irt"] for f in folds)
        },
    }
    _check_finite(report)
    return ExperimentReport(report, audits)


def _check_finite(obj) -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NumericError("report contains a non-finite number")
    if isinstance(obj, dict):
        for v in obj.values():
            _check_finite(v)
    elif isinstance(obj, list):
        for v in obj:
            _check_finite(v)
