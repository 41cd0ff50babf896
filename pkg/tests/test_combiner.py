from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birtcombine.birt import FitConfig
from birtcombine.combiner import (
    RULES,
    FittedCombiner,
    Interval,
    PredictionMatrix,
    build_error_matrix,
    combine,
    confidence_interval,
    fit_combiner,
)
from birtcombine.errors import InputError
from birtcombine.scale import load_scale, make_scale

EEBR = load_scale("eebr")
BPNE = load_scale("bpne")


def pm(rows, ids=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return PredictionMatrix(rows, ids or [f"m{j}" for j in range(rows.shape[1])],
                            [f"i{k}" for k in range(rows.shape[0])])


def brute_choice(preds, ee, scale, weighted=True):
    """Straight transcription of the selection rule, one instance at a time."""
    bs = list(scale.band_scores)
    e = [ee[scale.band_of(p), j] for j, p in enumerate(preds)]
    w = [1 - x if weighted else 1.0 for x in e]
    iv = [(p - x * scale.range, p + x * scale.range) for p, x in zip(preds, e)]
    votes = [sum(wj for wj, (lo, hi) in zip(w, iv) if lo <= s <= hi) for s in bs]
    wmean = sum(wj * p for wj, p in zip(w, preds)) / sum(w)
    if max(votes) <= 0:
        return scale.band_of(wmean), "fallback"
    cand = [k for k, v in enumerate(votes) if v == max(votes)]
    if len(cand) == 1:
        return cand[0], "argmax"
    dist = [abs(bs[k] - wmean) for k in cand]
    near = [k for k, dd in zip(cand, dist) if dd == min(dist)]
    return (near[0], "tiebreak_distance") if len(near) == 1 else (min(near), "tiebreak_lower")


def test_error_matrix_example():
    em = build_error_matrix(pm([[100], [140], [180]]), [120, 120, 160], EEBR)
    assert em.values[3, 0] == pytest.approx(0.1)
    assert em.values[4, 0] == pytest.approx(0.1)
    assert em.support[:, 0].tolist() == [0, 0, 0, 2, 1, 0]
    assert em.missing[:, 0].tolist() == [True, True, True, False, False, True]


def test_error_matrix_exact_model_clamps_and_single_band():
    em = build_error_matrix(pm([[120, 130], [120, 110]]), [120, 120], EEBR)
    assert em.values[3, 0] == 1e-4
    assert (~em.missing).sum(axis=0).tolist() == [1, 1]
    obs = em.observations()
    assert obs.mask.sum() == 2


def test_error_matrix_errors():
    with pytest.raises(InputError):
        build_error_matrix(PredictionMatrix(np.zeros((0, 2)), ["a", "b"], []), [], EEBR)
    with pytest.raises(InputError):
        build_error_matrix(pm([[1, 2]]), [1, 2], EEBR)


@pytest.mark.parametrize("pred,e,lo,hi", [(130, 0.1, 110, 150), (130, 1e-4, 129.98, 130.02), (5, 0.5, -95, 105)])
def test_confidence_interval(pred, e, lo, hi):
    iv = confidence_interval(pred, 0, np.full((6, 1), e), EEBR)
    assert (iv.lo, iv.hi) == pytest.approx((lo, hi))


def test_interval_type():
    assert 5 in Interval(0, 10) and 10 in Interval(0, 10) and 11 not in Interval(0, 10)
    with pytest.raises(InputError):
        Interval(2, 1)


def test_three_models_agree_on_120():
    res = combine(pm([[118, 125, 131]]), np.full((6, 3), 0.1), EEBR)
    assert res.scores.tolist() == [120.0]
    assert res.rules == ["argmax"]
    votes = res.audit[0]["votes"]
    assert votes["120"] == pytest.approx(2.7) and sum(v > 0 for v in votes.values()) == 1


def test_two_models_more_reliable_wins():
    # intervals [30, 50] and [150, 170]; model 0 has the lower expected error
    ee = np.full((6, 2), 0.05)
    ee[1, 0] = 0.05
    ee[4, 1] = 0.1
    res = combine(pm([[40, 160]]), ee, EEBR)
    lo, hi = res.audit[0]["intervals"]["m0"], res.audit[0]["intervals"]["m1"]
    assert lo == pytest.approx([30, 50]) and hi == pytest.approx([140, 180])
    assert res.bands.tolist() == [1]
    # swap reliabilities: the other model wins
    ee2 = np.full((6, 2), 0.1)
    ee2[4, 1] = 0.05
    assert combine(pm([[40, 160]]), ee2, EEBR).bands.tolist() == [4]


def test_fallback_fires():
    res = combine(pm([[19.98, 19.98]]), np.full((6, 2), 1e-4), EEBR)
    assert res.rules == ["fallback"]
    assert res.bands.tolist() == [0]
    assert res.audit[0]["rule"] == "fallback"


def test_tiebreak_distance_and_lower():
    # both +/-50 intervals cover 80 and 120; weighted mean 110 is closer to 120
    res = combine(pm([[105, 115]]), np.full((6, 2), 0.25), EEBR)
    assert res.rules == ["tiebreak_distance"] and res.scores.tolist() == [120.0]
    # weighted mean exactly 100 sits midway: the lower band wins
    res = combine(pm([[100, 100]]), np.full((6, 2), 0.25), EEBR)
    assert res.rules == ["tiebreak_lower"] and res.scores.tolist() == [80.0]


def test_widest_last_and_unweighted_flags():
    res = combine(pm([[105, 115]]), np.full((6, 2), 0.25), EEBR, tiebreak="widest_last")
    assert res.rules[0] in ("tiebreak_width", "tiebreak_lower")
    ee = np.full((6, 2), 0.1)
    ee[3, 1] = 0.3
    weighted = combine(pm([[119, 121]]), ee, EEBR)
    flat = combine(pm([[119, 121]]), ee, EEBR, weighted=False)
    assert weighted.audit[0]["votes"]["120"] == pytest.approx(0.9 + 0.7)
    assert flat.audit[0]["votes"]["120"] == 2.0
    with pytest.raises(InputError):
        combine(pm([[1, 2]]), ee, EEBR, tiebreak="coin")


def test_shape_errors():
    with pytest.raises(InputError):
        combine(pm([[1, 2, 3]]), np.full((6, 2), 0.1), EEBR)
    with pytest.raises(InputError):
        combine(pm([[1]]), np.full((6, 1), 0.1), EEBR)


def test_matches_brute_force_random():
    rng = np.random.default_rng(0)
    for scale in (EEBR, BPNE):
        for _ in range(300):
            M = int(rng.integers(2, 5))
            lo, hi = scale.band_scores[0], scale.band_scores[-1]
            preds = rng.uniform(lo - 0.2 * scale.range, hi + 0.2 * scale.range, M)
            if rng.uniform() < 0.3:
                preds = np.round(preds / (scale.range / 20)) * (scale.range / 20)
            ee = rng.uniform(1e-4, 0.4, (scale.n_bands, M))
            weighted = bool(rng.integers(2))
            res = combine(pm([preds]), ee, scale, weighted=weighted)
            assert (int(res.bands[0]), res.rules[0]) == brute_choice(preds, ee, scale, weighted)


def test_audit_contents_and_rules():
    rng = np.random.default_rng(1)
    P = rng.uniform(-20, 220, (200, 3))
    ee = rng.uniform(1e-4, 0.3, (6, 3))
    extra = np.zeros((6, 3), bool)
    extra[0, :] = True
    res = combine(pm(P), ee, EEBR, extrapolated=extra)
    assert set(res.rules) <= set(RULES)
    for rec, row in zip(res.audit, P):
        assert rec["rule"] in RULES
        assert rec["extrapolated"] == bool((EEBR.bands_of(row) == 0).any())
        assert set(rec) >= {"instance_id", "intervals", "votes", "final_score", "rule", "weighted_mean"}
        json.dumps(rec)
    assert sum(res.rule_counts.values()) == 200


def _unanimous_fixture(rng, scale):
    b = int(rng.integers(scale.n_bands))
    edges = [-np.inf, *scale.thresholds, np.inf]
    lo = max(edges[b], scale.band_scores[0] - scale.range * 0.25)
    hi = min(edges[b + 1], scale.band_scores[-1] + scale.range * 0.25)
    M = int(rng.integers(2, 6))
    preds = rng.uniform(lo, hi, M)
    preds = np.where(preds == edges[b + 1], lo, preds)
    # each interval must reach the band score
    need = np.abs(preds - scale.band_scores[b]) / scale.range
    ee = rng.uniform(1e-4, 0.6, (scale.n_bands, M))
    pb = scale.bands_of(preds)
    ee[pb, np.arange(M)] = np.maximum(ee[pb, np.arange(M)], np.minimum(need * (1 + 1e-9) + 1e-12, 0.9999))
    return b, preds, ee


def test_unanimity_random():
    rng = np.random.default_rng(2)
    for scale in (EEBR, BPNE):
        for _ in range(2000):
            b, preds, ee = _unanimous_fixture(rng, scale)
            assert combine(pm([preds]), ee, scale).bands[0] == b


def test_unanimity_breaks_only_exactly_on_a_threshold():
    # documented edge: a shared prediction exactly on a threshold ties by distance and goes lower
    res = combine(pm([[20.0, 20.0]]), np.full((6, 2), 0.2), EEBR)
    assert EEBR.band_of(20.0) == 1 and res.bands[0] == 0 and res.rules == ["tiebreak_lower"]


def test_identical_predictions_give_their_band():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        v = rng.uniform(-30, 230)
        M = int(rng.integers(2, 5))
        ee = rng.uniform(1e-4, 0.9, (6, M))
        assert combine(pm([[v] * M]), ee, EEBR).bands[0] == EEBR.band_of(v)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(-40, 240, allow_nan=False), min_size=2, max_size=5),
    st.sampled_from([0.5, 2.0, 3.0, 7.25, 0.01, 1000.0]),
    st.integers(0, 2**32 - 1),
)
def test_scale_equivariance(preds, c, seed):
    ee = np.random.default_rng(seed).uniform(1e-4, 0.5, (6, len(preds)))
    base = combine(pm([preds]), ee, EEBR)
    big = combine(pm([np.array(preds) * c]), ee, EEBR.scaled(c))
    b0 = base.bands[0]
    b1 = big.bands[0]
    if b0 != b1:
        # only possible when a value sits on a boundary to within rounding of the multiplication
        P = np.array(preds)
        e = ee[EEBR.bands_of(P), np.arange(P.size)]
        gaps = np.abs(np.subtract.outer(np.r_[P - e * 200, P + e * 200, P], np.r_[EEBR.band_scores, EEBR.thresholds]))
        assert gaps.min() < 1e-9 * max(1.0, np.abs(P).max())


def test_monotone_reliability():
    from birtcombine import _kernels_py

    rng = np.random.default_rng(4)
    bands = np.array(EEBR.band_scores, float)
    for _ in range(200):
        lo = rng.uniform(-20, 200, (1, 3))
        hi = lo + rng.uniform(0, 100, (1, 3))
        e = rng.uniform(1e-4, 0.5, (1, 3))
        more = e.copy()
        more[0, 1] += rng.uniform(0, 0.4)
        with_m = _kernels_py.interval_votes(lo, hi, 1 - e, bands)
        worse = _kernels_py.interval_votes(lo, hi, 1 - more, bands)
        assert np.all(worse <= with_m + 1e-15)


def test_fitted_combiner_roundtrip_and_extrapolation(backend):
    rng = np.random.default_rng(5)
    gold = rng.choice([40.0, 80, 120, 160], 80)
    P = np.column_stack([gold + rng.normal(0, s, 80) for s in (10, 20, 30)])
    fc = fit_combiner(pm(P, ["a", "b", "c"]), gold, EEBR, FitConfig())
    assert fc.extrapolated[0].all() and fc.extrapolated[5].all()
    assert fc.extrapolated[1:5].sum() == 0
    assert np.all((fc.expected_errors > 0) & (fc.expected_errors < 1))
    back = FittedCombiner.from_dict(json.loads(json.dumps(fc.to_dict())))
    test = pm(rng.uniform(0, 200, (50, 3)), ["a", "b", "c"])
    r1, r2 = fc.combine(test), back.combine(test)
    assert r1.bands.tolist() == r2.bands.tolist()
    reordered = test.columns(["c", "a", "b"])
    assert fc.combine(reordered).bands.tolist() == r1.bands.tolist()


def test_prediction_matrix_validation():
    with pytest.raises(InputError):
        PredictionMatrix([[1.0, np.nan]], ["a", "b"], ["x"])
    with pytest.raises(InputError):
        PredictionMatrix([[1.0, 2.0]], ["a", "a"], ["x"])
    with pytest.raises(InputError):
        PredictionMatrix([[1.0, 2.0]], ["a"], ["x"])
    with pytest.raises(InputError):
        pm([[1, 2]]).columns(["zz"])
