"""Corpus-level featurization and the feature-matrix CSV format."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import InputError
from ..io import read_jsonl
from .config import ConnectiveLexicon, FeatureConfig
from .extract import FeatureRegistry, extract_features
from .tokenize import tokenize


@dataclass(frozen=True)
class EssayRecord:
    id: str
    text: str
    score: float


@dataclass(frozen=True)
class FeatureTable:
    ids: tuple[str, ...]
    registry: FeatureRegistry
    matrix: np.ndarray
    scores: np.ndarray
    flags: dict[str, tuple[str, ...]]

    def registry_json(self) -> dict:
        out = self.registry.to_dict()
        out["flags"] = {k: list(v) for k, v in sorted(self.flags.items())}
        return out


def read_corpus(path: str | Path) -> list[EssayRecord]:
    out = []
    for k, rec in enumerate(read_jsonl(path), start=1):
        try:
            out.append(EssayRecord(str(rec["id"]), str(rec["text"]), float(rec["score"])))
        except (KeyError, TypeError, ValueError):
            raise InputError(f"{path}:{k}: corpus records need 'id', 'text' and numeric 'score'") from None
    return out


def _one(args):
    rec, lexicon, config = args
    try:
        return extract_features(tokenize(rec.text, config), lexicon, config)
    except InputError as exc:
        raise InputError(f"essay {rec.id!r}: {exc}") from None


def featurize_corpus(
    records: Iterable[EssayRecord | tuple],
    lexicon: ConnectiveLexicon | None = None,
    config: FeatureConfig | None = None,
    workers: int | None = None,
) -> FeatureTable:
    lexicon = lexicon or ConnectiveLexicon.default()
    config = config or FeatureConfig()
    recs = [r if isinstance(r, EssayRecord) else EssayRecord(str(r[0]), r[1], float(r[2])) for r in records]
    if not recs:
        raise InputError("corpus is empty")
    seen, dups = set(), []
    for r in recs:
        if r.id in seen and r.id not in dups:
            dups.append(r.id)
        seen.add(r.id)
    if dups:
        raise InputError(f"duplicate essay ids: {', '.join(dups)}")
    jobs = [(r, lexicon, config) for r in recs]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            vecs = list(ex.map(_one, jobs, chunksize=16))
    else:
        vecs = [_one(j) for j in jobs]
    registry = vecs[0].registry
    matrix = np.vstack([v.values for v in vecs])
    flags = {r.id: v.flags for r, v in zip(recs, vecs) if v.flags}
    return FeatureTable(tuple(r.id for r in recs), registry, matrix,
                        np.array([r.score for r in recs], dtype=float), flags)


def write_feature_csv(table: FeatureTable, path: str | Path, registry_path: str | Path | None = None) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["instance_id", *table.registry.names, "score"])
        for iid, row, s in zip(table.ids, table.matrix, table.scores):
            wr.writerow([iid, *(repr(float(x)) for x in row), repr(float(s))])
    if registry_path is not None:
        Path(registry_path).write_text(json.dumps(table.registry_json(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature CSV as loaded: any numeric columns, not necessarily from this featurizer."""

    ids: tuple[str, ...]
    names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray

    def rows(self, idx: Sequence[int]) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(tuple(self.ids[i] for i in idx), self.names, self.X[idx], self.y[idx])


def read_feature_csv(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"feature file {path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 3 or rows[0][0] != "instance_id" or rows[0][-1] != "score":
        raise InputError(f"{path}: header must be 'instance_id,<features...>,score'")
    header = rows[0]
    ids, vals = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        try:
            vals.append([float(x) for x in row[1:]])
        except ValueError:
            raise InputError(f"{path}:{ln}: non-numeric value") from None
        ids.append(row[0])
    if not ids:
        raise InputError(f"{path}: no rows")
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate instance ids")
    arr = np.array(vals, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite values")
    return FeatureMatrix(tuple(ids), tuple(header[1:-1]), arr[:, :-1], arr[:, -1])
