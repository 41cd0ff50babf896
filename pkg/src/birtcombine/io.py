"""CSV / JSONL readers and writers for predictions, gold scores and audits.

Floats are written with ``repr`` so every file reloads bit-identically.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .combiner import PredictionMatrix
from .errors import InputError


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{where}: {text!r} is not a number") from None


def write_predictions(pm: PredictionMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["instance_id", *pm.model_ids])
        for iid, row in zip(pm.instance_ids, pm.values):
            wr.writerow([iid, *map(_fmt, row)])


COMBINED_HEADER = ["instance_id", "band", "score", "rule"]


def read_predictions(path: str | Path) -> PredictionMatrix:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"prediction file {path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "instance_id":
        raise InputError(f"{path}: header must start with 'instance_id'")
    header = rows[0]
    if header == COMBINED_HEADER:
        # combiner output: keep only the final score column
        rows = [[r[0], r[2]] if r else r for r in rows]
        header = ["instance_id", "combined"]
    if len(header) < 2:
        raise InputError(f"{path}: no model columns")
    ids, vals = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        vals.append([_parse_float(x, f"{path}:{ln}") for x in row[1:]])
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate instance ids")
    return PredictionMatrix(np.array(vals, dtype=float).reshape(len(ids), len(header) - 1),
                            tuple(header[1:]), tuple(ids))


def write_gold(ids: Sequence[str], scores: Sequence[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["instance_id", "score"])
        for i, s in zip(ids, scores):
            wr.writerow([i, _fmt(s)])


def read_gold(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"gold file {path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["instance_id", "score"]:
        raise InputError(f"{path}: header must be 'instance_id,score'")
    ids, scores = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        ids.append(row[0])
        scores.append(_parse_float(row[1], f"{path}:{ln}"))
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate instance ids")
    return tuple(ids), np.array(scores, dtype=float)


def gold_for(instance_ids: Sequence[str], path: str | Path) -> np.ndarray:
    """Gold scores for ``instance_ids``; extra rows in the gold file are ignored."""
    ids, scores = read_gold(path)
    pos = {iid: k for k, iid in enumerate(ids)}
    missing = [i for i in instance_ids if i not in pos]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise InputError(f"gold file lacks {len(missing)} instance ids: {shown}")
    return scores[[pos[i] for i in instance_ids]]


def align(pm: PredictionMatrix, instance_ids: Sequence[str], source: str = "predictions") -> PredictionMatrix:
    """Reorder rows of ``pm`` to ``instance_ids``; every id must be present."""
    pos = {iid: k for k, iid in enumerate(pm.instance_ids)}
    missing = [i for i in instance_ids if i not in pos]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise InputError(f"{source} missing {len(missing)} instance ids: {shown}")
    return pm.rows([pos[i] for i in instance_ids])


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path} not found")
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{ln}: {exc}") from None
    return out
