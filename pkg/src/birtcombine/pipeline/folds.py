"""Stratified fold plans with a stratified validation split inside each training portion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, StratificationError
from ..regressors import derive_seed


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]
    validation: tuple[np.ndarray, ...]
    seed: int
    n: int
    sparse_bands: tuple[int, ...] = ()

    def test(self, f: int) -> np.ndarray:
        return self.folds[f]

    def train(self, f: int) -> np.ndarray:
        keep = np.ones(self.n, dtype=bool)
        keep[self.folds[f]] = False
        return np.flatnonzero(keep)

    def fit(self, f: int) -> np.ndarray:
        """Training portion minus the validation subset: what the regressors see."""
        keep = np.ones(self.n, dtype=bool)
        keep[self.folds[f]] = False
        keep[self.validation[f]] = False
        return np.flatnonzero(keep)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "n": self.n,
            "sparse_bands": list(self.sparse_bands),
            "folds": [
                {"test": f.tolist(), "validation": v.tolist()} for f, v in zip(self.folds, self.validation)
            ],
        }


def _allocate(counts: dict[int, int], total: int) -> dict[int, int]:
    """Split ``total`` across bands proportionally, at least one per band that can spare one."""
    n = sum(counts.values())
    quota = {b: total * c / n for b, c in counts.items()}
    alloc = {b: min(c, math.floor(quota[b])) for b, c in counts.items()}
    eligible = sorted(b for b, c in counts.items() if c >= 2)
    if total >= len(eligible):
        for b in eligible:
            alloc[b] = max(alloc[b], 1)
    excess = sum(alloc.values()) - total
    while excess > 0:
        floor_of = {b: (1 if b in eligible and total >= len(eligible) else 0) for b in alloc}
        cands = [b for b in alloc if alloc[b] > floor_of[b]]
        b = max(cands, key=lambda b: (alloc[b] - quota[b], -b))
        alloc[b] -= 1
        excess -= 1
    while excess < 0:
        cands = [b for b in alloc if alloc[b] < counts[b] - (1 if counts[b] >= 2 else 0)] or \
                [b for b in alloc if alloc[b] < counts[b]]
        b = max(cands, key=lambda b: (quota[b] - alloc[b], -b))
        alloc[b] += 1
        excess += 1
    return alloc


def plan_folds(gold_bands, k: int = 10, validation_fraction: float = 0.1, seed: int = 0) -> FoldPlan:
    """Round-robin each band's shuffled members over the folds.

    The fold pointer carries over from one band to the next, so fold sizes
    differ by at most one overall as well as per band.
    """
    bands = np.asarray(gold_bands, dtype=np.int64)
    n = bands.size
    if k < 2:
        raise InputError("need at least 2 folds")
    if n < k:
        raise InputError(f"{n} instances cannot fill {k} folds")
    if not 0 < validation_fraction < 1:
        raise InputError("validation_fraction must lie in (0, 1)")
    present = np.unique(bands)
    if present.size < 2:
        raise StratificationError("gold scores fall in a single band; nothing to stratify")
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    members: list[list[int]] = [[] for _ in range(k)]
    sparse = []
    pointer = 0
    for b in present:
        idx = rng.permutation(np.flatnonzero(bands == b))
        if idx.size < k:
            sparse.append(int(b))
        for i in idx:
            members[pointer % k].append(int(i))
            pointer += 1
    folds = tuple(np.sort(np.array(m, dtype=np.int64)) for m in members)

    validation = []
    for f in range(k):
        keep = np.ones(n, dtype=bool)
        keep[folds[f]] = False
        train = np.flatnonzero(keep)
        size = min(train.size - 1, math.ceil(validation_fraction * train.size))
        counts = {int(b): int((bands[train] == b).sum()) for b in np.unique(bands[train])}
        alloc = _allocate(counts, size)
        vrng = np.random.default_rng(derive_seed(seed, "validation", f))
        picked = []
        for b in sorted(counts):
            pool = train[bands[train] == b]
            picked.extend(vrng.permutation(pool)[: alloc[b]].tolist())
        validation.append(np.sort(np.array(picked, dtype=np.int64)))
    return FoldPlan(k, folds, tuple(validation), int(seed), n, tuple(sparse))
