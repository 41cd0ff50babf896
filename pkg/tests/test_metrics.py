from __future__ import annotations

import itertools

import numpy as np
import pytest

from birtcombine.errors import InputError, UndefinedMetricError
from birtcombine.metrics import (
    ConfusionMatrix,
    confusion,
    interpret_kappa,
    interpret_pearson,
    kappa,
    metric_report,
    pearson,
)


def brute_kappa(gold, pred, k, weighting):
    """Weighted kappa straight from pairwise definitions, no matrices."""
    n = len(gold)

    def w(i, j):
        if weighting == "none":
            return 0.0 if i == j else 1.0
        p = 1 if weighting == "linear" else 2
        return abs(i - j) ** p / (k - 1) ** p

    observed = sum(w(g, p) for g, p in zip(gold, pred)) / n
    expected = sum(w(g, p) for g in gold for p in pred) / (n * n)
    return 1.0 - observed / expected


def brute_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / (vx * vy) ** 0.5


def test_confusion_examples():
    assert confusion([0, 1], [0, 1], 2).tolist() == [[1, 0], [0, 1]]
    assert confusion([0, 0], [1, 1], 2).tolist() == [[0, 2], [0, 0]]
    assert confusion([0, 1, 1, 2], [0, 1, 2, 2], 3).tolist() == [[1, 0, 0], [0, 1, 1], [0, 0, 1]]


@pytest.mark.parametrize("gold,pred,k", [([0, 1], [0], 2), ([0, 3], [0, 1], 3), ([], [], 2), ([0, -1], [0, 0], 2)])
def test_confusion_errors(gold, pred, k):
    with pytest.raises(InputError):
        confusion(gold, pred, k)


def test_kappa_examples():
    cm = confusion([0, 1, 1, 2], [0, 1, 2, 2], 3)
    assert kappa(cm, "none") == pytest.approx(0.6364, abs=1e-4)
    assert kappa(cm, "none") == pytest.approx((0.75 - 5 / 16) / (1 - 5 / 16), abs=1e-12)
    assert kappa(cm, "quadratic") == pytest.approx(brute_kappa([0, 1, 1, 2], [0, 1, 2, 2], 3, "quadratic"), abs=1e-12)
    for w in ("none", "linear", "quadratic"):
        assert kappa(ConfusionMatrix(np.diag([3, 1, 4])), w) == 1.0


def test_kappa_degenerate():
    one_cell = ConfusionMatrix(np.array([[5, 0], [0, 0]]))
    assert kappa(one_cell, "quadratic") == 1.0
    for w in ("none", "linear", "quadratic"):
        assert kappa(one_cell, w) == 1.0
    # opposite constant raters: expected disagreement is 1, so kappa is 0, not undefined
    assert kappa(ConfusionMatrix(np.array([[0, 5], [0, 0]])), "none") == 0.0


def test_kappa_oracle_random():
    rng = np.random.default_rng(11)
    for _ in range(300):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(2, 15))
        gold = rng.integers(0, k, n).tolist()
        pred = rng.integers(0, k, n).tolist()
        cm = confusion(gold, pred, k)
        for w in ("none", "linear", "quadratic"):
            try:
                want = brute_kappa(gold, pred, k, w)
            except ZeroDivisionError:
                continue
            assert kappa(cm, w) == pytest.approx(want, abs=1e-9)


def test_qwk_two_by_two_covariance_identity():
    """At k=2, QWK = 2 cov / (var_x + var_y + (mean_x - mean_y)^2), exhaustively up to total 12."""
    for total in range(1, 13):
        for a, b, c in itertools.product(range(total + 1), repeat=3):
            d = total - a - b - c
            if d < 0:
                continue
            gold = [0] * (a + b) + [1] * (c + d)
            pred = [0] * a + [1] * b + [0] * c + [1] * d
            x, y = np.array(gold, float), np.array(pred, float)
            den = x.var() + y.var() + (x.mean() - y.mean()) ** 2
            cm = ConfusionMatrix(np.array([[a, b], [c, d]]))
            if den == 0:
                assert kappa(cm, "quadratic") == 1.0
                continue
            assert kappa(cm, "quadratic") == pytest.approx(2 * np.cov(x, y, bias=True)[0, 1] / den, abs=1e-12)


def test_unweighted_kappa_permutation_invariant_weighted_not():
    rng = np.random.default_rng(3)
    moved = False
    for _ in range(50):
        counts = rng.integers(0, 6, (4, 4))
        perm = rng.permutation(4)
        cm, pm = ConfusionMatrix(counts), ConfusionMatrix(counts[np.ix_(perm, perm)])
        assert kappa(pm, "none") == pytest.approx(kappa(cm, "none"), abs=1e-12)
        moved |= abs(kappa(pm, "quadratic") - kappa(cm, "quadratic")) > 1e-6
    assert moved


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [-1, -2, -3]) == -1.0
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9820, abs=1e-4)


def test_pearson_undefined_and_bad_input():
    with pytest.raises(UndefinedMetricError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedMetricError):
        pearson([0.1] * 7, [1, 2, 3, 4, 5, 6, 7])
    with pytest.raises(InputError):
        pearson([1], [1])
    with pytest.raises(InputError):
        pearson([1, 2], [1, 2, 3])


def test_pearson_affine_and_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = rng.normal(size=int(rng.integers(2, 20)))
        a = rng.choice([-1, 1]) * rng.uniform(0.1, 10)
        assert pearson(x, a * x + rng.normal()) == pytest.approx(np.sign(a), abs=1e-9)
        y = rng.normal(size=x.size)
        assert pearson(x, y) == pytest.approx(brute_pearson(x.tolist(), y.tolist()), abs=1e-9)


def test_confusion_row_sums():
    rng = np.random.default_rng(0)
    gold = rng.integers(0, 5, 100)
    cm = confusion(gold, rng.integers(0, 5, 100), 5)
    assert cm.counts.sum(axis=1).tolist() == np.bincount(gold, minlength=5).tolist()
    assert cm.total == 100


@pytest.mark.parametrize("value,label", [
    (0.45, "moderate"), (0.15, "low"), (0.81, "very_high"), (0.2, "low"), (0.4, "fair"),
    (0.6, "moderate"), (0.8, "good"), (-0.3, "low"), (1.0, "very_high"),
])
def test_interpret_kappa(value, label):
    assert interpret_kappa(value) == label


@pytest.mark.parametrize("r,label", [
    (0.5, "moderate positive"), (-1.0, "perfect negative"), (0.0, "none"), (0.3, "weak positive"),
    (-0.7, "moderate negative"), (0.71, "strong positive"), (1.0, "perfect positive"),
])
def test_interpret_pearson(r, label):
    assert interpret_pearson(r) == label


def test_metric_report_nulls():
    rep = metric_report([0, 1, 2], [1, 1, 1], 3, [0.0, 40.0, 80.0], [50.0, 50.0, 50.0])
    assert rep["pearson"] is None and rep["pearson_label"] is None
    assert rep["confusion"] == [[0, 1, 0], [0, 1, 0], [0, 1, 0]]
    assert set(rep) >= {"kappa_none", "kappa_linear", "qwk", "pearson", "confusion"}
