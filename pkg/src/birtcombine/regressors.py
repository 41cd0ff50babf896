"""Baseline regressors and ensembles written directly on numpy.

These serve both as comparison systems and as IRT respondents. Heavy external
learners (SVR, boosted trees, transformers) enter the pipeline only through
imported prediction files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ._backend import kernels
from .errors import InputError

KINDS = ("mean", "linear", "ridge", "knn", "cart", "forest", "voting", "stacked")

DEFAULTS: dict[str, dict[str, Any]] = {
    "mean": {},
    "linear": {},
    "ridge": {"lam": 1.0},
    "knn": {"k": 5},
    "cart": {"max_depth": 12, "min_leaf": 5},
    "forest": {"trees": 100, "max_depth": 12, "min_leaf": 5, "feature_fraction": 1 / 3},
    "voting": {},
    "stacked": {"meta": "linear", "folds": 5},
}

SINGULAR_RIDGE = 1e-8


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    members: tuple["RegressorSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown regressor kind {self.kind!r}; choose from {KINDS}")
        merged = {**DEFAULTS[self.kind], **self.params}
        unknown = set(merged) - set(DEFAULTS[self.kind])
        if unknown:
            raise InputError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        object.__setattr__(self, "params", merged)
        p = merged
        if self.kind == "ridge" and not p["lam"] > 0:
            raise InputError("ridge lambda must be positive")
        if self.kind == "knn" and not (int(p["k"]) == p["k"] and p["k"] >= 1):
            raise InputError("knn k must be a positive integer")
        if self.kind in ("cart", "forest"):
            if p["max_depth"] < 0 or p["min_leaf"] < 1:
                raise InputError(f"{self.kind}: max_depth >= 0 and min_leaf >= 1 required")
        if self.kind == "forest":
            if p["trees"] < 1 or not 0 < p["feature_fraction"] <= 1:
                raise InputError("forest needs trees >= 1 and feature_fraction in (0, 1]")
        if self.kind in ("voting", "stacked"):
            if len(self.members) < 2:
                raise InputError(f"{self.kind} needs at least 2 members")
        elif self.members:
            raise InputError(f"{self.kind} takes no members")
        if self.kind == "stacked":
            if p["meta"] not in ("linear", "ridge"):
                raise InputError("stacked meta must be 'linear' or 'ridge'")
            if p["folds"] < 2:
                raise InputError("stacked needs at least 2 internal folds")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, **self.params}
        if self.members:
            out["members"] = [m.to_dict() for m in self.members]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RegressorSpec":
        if not isinstance(data, dict):
            raise InputError(f"regressor spec must be an object, got {data!r}")
        data = dict(data)
        try:
            kind = data.pop("kind")
        except KeyError:
            raise InputError("regressor spec needs a 'kind'") from None
        members = tuple(cls.from_dict(m) for m in data.pop("members", []))
        if kind == "ridge" and "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(kind, data, members)


def load_roster(path: str | Path) -> dict[str, RegressorSpec]:
    """Roster JSON: ``{"model_id": {"kind": ..., <hyperparameters>}, ...}``.

    An experiment configuration is accepted too; its ``roster`` entry is used.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read roster {path}: {exc}") from None
    if isinstance(data, dict) and isinstance(data.get("roster"), dict):
        data = data["roster"]
    return parse_roster(data)


def parse_roster(data: dict) -> dict[str, RegressorSpec]:
    if not isinstance(data, dict) or not data:
        raise InputError("roster must be a non-empty JSON object of model specs")
    bad = [k for k, v in data.items() if not isinstance(v, dict)]
    if bad:
        raise InputError(f"roster entries must be objects with a 'kind': {bad}")
    return {str(k): RegressorSpec.from_dict(v) for k, v in data.items()}


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (independent of PYTHONHASHSEED)."""
    h = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


# ---------------------------------------------------------------- helpers


class _Standardizer:
    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.sd


def _solve_ls(Z: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Least squares with intercept in column 0; ``lam`` penalises the other columns."""
    G = Z.T @ Z
    rhs = Z.T @ y
    pen = np.eye(G.shape[0]) * lam
    pen[0, 0] = 0.0
    if lam == 0.0:
        if np.linalg.matrix_rank(G) < G.shape[0]:
            pen = np.eye(G.shape[0]) * SINGULAR_RIDGE
            pen[0, 0] = 0.0
        else:
            return np.linalg.solve(G, rhs)
    return np.linalg.solve(G + pen, rhs)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise InputError("features must be a 2-D matrix")
    if X.shape[1] == 0:
        raise InputError("feature matrix has no columns")
    if X.shape[0] < 2:
        raise InputError("need at least 2 training rows")
    if y.shape != (X.shape[0],):
        raise InputError("target length does not match feature rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data must be finite")
    return X, y


# ---------------------------------------------------------------- trees


@dataclass
class Tree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_leaf: int,
    feature_fraction: float = 1.0,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy variance-reduction CART, grown depth first."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    F = X.shape[1]
    n_sub = max(1, int(round(feature_fraction * F)))
    all_features = np.arange(F, dtype=np.int64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0], dtype=np.int64), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2 * min_leaf or np.ptp(y[rows]) == 0:
            continue
        if n_sub < F:
            feats = np.sort(rng.choice(F, size=n_sub, replace=False)).astype(np.int64)
        else:
            feats = all_features
        f, thr, _ = kernels.best_split(X, y, rows, feats, min_leaf)
        if f < 0:
            continue
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # push right first so the left subtree is expanded first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
    )


def bootstrap_indices(seed: int, n: int, trees: int) -> list[np.ndarray]:
    """Row samples a forest with this seed draws, one per tree."""
    rng = np.random.default_rng(seed)
    return [rng.integers(0, n, size=n) for _ in range(trees)]


# ---------------------------------------------------------------- models


@dataclass
class TrainedModel:
    spec: RegressorSpec
    n_features: int
    state: dict

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def train(spec: RegressorSpec, X, y, seed: int = 0) -> TrainedModel:
    X, y = _check_xy(X, y)
    F = X.shape[1]
    kind = spec.kind
    p = spec.params
    if kind == "mean":
        return TrainedModel(spec, F, {"mean": float(y.mean())})
    if kind in ("linear", "ridge"):
        std = _Standardizer(X)
        Z = np.hstack([np.ones((X.shape[0], 1)), std(X)])
        beta = _solve_ls(Z, y, 0.0 if kind == "linear" else float(p["lam"]))
        coef = beta[1:] / std.sd
        intercept = float(beta[0] - coef @ std.mean)
        if not (np.all(np.isfinite(coef)) and np.isfinite(intercept)):
            raise InputError(f"{kind}: coefficients are not finite")
        return TrainedModel(spec, F, {"coef": coef, "intercept": intercept})
    if kind == "knn":
        std = _Standardizer(X)
        return TrainedModel(spec, F, {"std": std, "Z": std(X), "y": y.copy()})
    if kind == "cart":
        tree = grow_tree(X, y, int(p["max_depth"]), int(p["min_leaf"]))
        return TrainedModel(spec, F, {"tree": tree})
    if kind == "forest":
        boots = bootstrap_indices(seed, X.shape[0], int(p["trees"]))
        trees = []
        for k, idx in enumerate(boots):
            tree_rng = np.random.default_rng(derive_seed(seed, "tree", k))
            trees.append(grow_tree(X[idx], y[idx], int(p["max_depth"]), int(p["min_leaf"]),
                                   float(p["feature_fraction"]), tree_rng))
        return TrainedModel(spec, F, {"trees": trees})
    if kind == "voting":
        members = [train(m, X, y, derive_seed(seed, "member", k)) for k, m in enumerate(spec.members)]
        return TrainedModel(spec, F, {"members": members})
    if kind == "stacked":
        return _train_stacked(spec, X, y, seed)
    raise AssertionError(kind)


def _kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    return [order[i::k] for i in range(k)]


def _train_stacked(spec: RegressorSpec, X, y, seed) -> TrainedModel:
    p = spec.params
    n = X.shape[0]
    k = min(int(p["folds"]), n)
    if k < 2:
        raise InputError("stacked regressor needs at least 2 rows per internal fold")
    oof = np.zeros((n, len(spec.members)))
    for fi, test_idx in enumerate(_kfold(n, k, derive_seed(seed, "stack-folds"))):
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        if train_idx.size < 2:
            raise InputError("stacked regressor: internal fold too small")
        for m, mspec in enumerate(spec.members):
            model = train(mspec, X[train_idx], y[train_idx], derive_seed(seed, "member", m, "fold", fi))
            oof[test_idx, m] = predict(model, X[test_idx])
    meta_spec = RegressorSpec(p["meta"])
    meta = train(meta_spec, oof, y, derive_seed(seed, "meta"))
    members = [train(m, X, y, derive_seed(seed, "member", k)) for k, m in enumerate(spec.members)]
    return TrainedModel(spec, X.shape[1], {"members": members, "meta": meta})


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InputError(
            f"expected {model.n_features} features, got {X.shape[1] if X.ndim == 2 else X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("prediction features must be finite")
    kind = model.spec.kind
    st = model.state
    if kind == "mean":
        return np.full(X.shape[0], st["mean"])
    if kind in ("linear", "ridge"):
        return X @ st["coef"] + st["intercept"]
    if kind == "knn":
        Zq = st["std"](X)
        k = min(int(model.spec.params["k"]), st["Z"].shape[0])
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], 64):
            q = Zq[lo : lo + 64]
            d2 = ((q[:, None, :] - st["Z"][None, :, :]) ** 2).sum(axis=2)
            nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[lo : lo + 64] = st["y"][nn].mean(axis=1)
        return out
    if kind == "cart":
        return st["tree"].predict(X)
    if kind == "forest":
        return np.mean([t.predict(X) for t in st["trees"]], axis=0)
    if kind == "voting":
        return np.mean([predict(m, X) for m in st["members"]], axis=0)
    if kind == "stacked":
        Z = np.column_stack([predict(m, X) for m in st["members"]])
        return predict(st["meta"], Z)
    raise AssertionError(kind)
