"""Cross-check the compiled kernels against the numpy fallback and brute force."""

from __future__ import annotations

import numpy as np
import pytest

from birtcombine import _kernels_py
from conftest import BACKENDS

compiled = BACKENDS.get("cython")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _obs(rng, B=6, M=5):
    obs = rng.uniform(0.01, 0.99, (B, M))
    mask = (rng.uniform(size=(B, M)) > 0.2).astype(np.uint8)
    mask[0, 0] = 1
    return obs, mask


@needs_ext
def test_loss_grad_parity():
    rng = np.random.default_rng(0)
    for _ in range(50):
        obs, mask = _obs(rng)
        x = [rng.normal(size=5), *(rng.normal(size=6) for _ in range(3))]
        a = _kernels_py.loss_grad(*x, obs, mask)
        b = compiled.loss_grad(*x, obs, mask)
        assert a[0] == pytest.approx(b[0], rel=1e-13)
        for ga, gb in zip(a[1:], b[1:]):
            np.testing.assert_allclose(ga, gb, rtol=1e-11, atol=1e-15)


@needs_ext
def test_descend_parity():
    rng = np.random.default_rng(1)
    obs, mask = _obs(rng)
    x = [rng.normal(size=5), *(rng.normal(size=6) for _ in range(3))]
    a = _kernels_py.descend(*x, obs, mask, 0.1, 500, 1e-9, 20)
    b = compiled.descend(*x, obs, mask, 0.1, 500, 1e-9, 20)
    for va, vb in zip(a[:4], b[:4]):
        np.testing.assert_allclose(va, vb, rtol=1e-8, atol=1e-10)
    assert a[4] == pytest.approx(b[4], rel=1e-8)
    assert a[7] == b[7] == -1


def _brute_split(X, y, rows, features, min_leaf):
    best = (-1, 0.0, 0.0)
    yn = y[rows]
    n = len(rows)
    base = ((yn - yn.mean()) ** 2).sum()
    for f in features:
        for thr in np.unique(X[rows, f])[:-1]:
            left = X[rows, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            sse = ((yn[left] - yn[left].mean()) ** 2).sum() + ((yn[~left] - yn[~left].mean()) ** 2).sum()
            gain = base - sse
            if gain > best[2] + 1e-9:
                best = (f, thr, gain)
    return best


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_best_split_matches_brute_force(name):
    k = BACKENDS[name]
    rng = np.random.default_rng(2)
    for _ in range(40):
        n, F = int(rng.integers(6, 40)), int(rng.integers(1, 4))
        X = rng.integers(0, 6, (n, F)).astype(float)
        y = rng.normal(size=n)
        rows = np.arange(n, dtype=np.int64)
        feats = np.arange(F, dtype=np.int64)
        f, thr, gain = k.best_split(X, y, rows, feats, 2)
        bf, bthr, bgain = _brute_split(X, y, rows, feats, 2)
        assert gain == pytest.approx(bgain, abs=1e-9)
        if bf >= 0:
            left = X[:, f] <= thr
            assert left.sum() >= 2 and (~left).sum() >= 2


@needs_ext
def test_best_split_parity():
    rng = np.random.default_rng(3)
    for _ in range(30):
        X = rng.normal(size=(60, 4)).round(1)
        y = rng.normal(size=60)
        rows = rng.choice(60, 45, replace=False).astype(np.int64)
        feats = np.array([3, 0, 2], dtype=np.int64)
        assert _kernels_py.best_split(X, y, rows, feats, 3) == compiled.best_split(X, y, rows, feats, 3)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_interval_votes(name):
    rng = np.random.default_rng(4)
    lo = rng.uniform(0, 200, (30, 4))
    hi = lo + rng.uniform(0, 90, (30, 4))
    w = rng.uniform(size=(30, 4))
    bands = np.array([0, 40, 80, 120, 160, 200.0])
    got = BACKENDS[name].interval_votes(lo, hi, w, bands)
    want = np.array([[sum(w[i, j] for j in range(4) if lo[i, j] <= s <= hi[i, j]) for s in bands]
                     for i in range(30)])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
