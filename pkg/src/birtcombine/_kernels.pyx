# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Beta-IRT loss/gradient and descent loop, CART split
search, interval vote tallies. Semantics mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, tanh, fabs, isfinite, INFINITY

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    cdef double ex
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    ex = exp(x)
    return ex / (1.0 + ex)


cdef inline double _softplus(double x) nogil:
    return (x if x > 0 else 0.0) + log1p(exp(-fabs(x)))


cdef double _loss_grad(double[::1] t, double[::1] d, double[::1] s, double[::1] w,
                       const double[:, ::1] obs, const unsigned char[:, ::1] mask,
                       double[::1] gt, double[::1] gd, double[::1] gs, double[::1] gw,
                       double[::1] a, double[::1] th, double[::1] sp) noexcept nogil:
    cdef Py_ssize_t B = obs.shape[0], M = obs.shape[1], i, j
    cdef Py_ssize_t n = 0
    cdef double loss = 0.0, diff, e, r, g, gam, inv_n
    for i in range(B):
        for j in range(M):
            if mask[i, j]:
                n += 1
    inv_n = 1.0 / n
    for j in range(M):
        gt[j] = 0.0
    for i in range(B):
        th[i] = tanh(s[i])
        sp[i] = _softplus(w[i])
        a[i] = th[i] * sp[i]
        gd[i] = 0.0
        gam = 0.0
        for j in range(M):
            if not mask[i, j]:
                continue
            diff = t[j] - d[i]
            e = _sigmoid(a[i] * diff)
            r = obs[i, j] - e
            loss += r * r
            g = -2.0 * r * e * (1.0 - e) * inv_n
            gt[j] += g * a[i]
            gd[i] -= g * a[i]
            gam += g * diff
        gs[i] = gam * (1.0 - th[i] * th[i]) * sp[i]
        gw[i] = gam * th[i] * _sigmoid(w[i])
    return loss * inv_n


def loss_grad(t, d, s, w, obs, mask):
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[:, ::1] ov = np.ascontiguousarray(obs, dtype=np.float64)
    cdef const unsigned char[:, ::1] mv = np.ascontiguousarray(mask, dtype=np.uint8)
    B, M = ov.shape[0], ov.shape[1]
    gt = np.zeros(M)
    gd = np.zeros(B)
    gs = np.zeros(B)
    gw = np.zeros(B)
    work = np.zeros((3, B))
    cdef double loss = _loss_grad(tv, dv, sv, wv, ov, mv, gt, gd, gs, gw,
                                  work[0], work[1], work[2])
    return loss, gt, gd, gs, gw


cdef bint _all_finite(double[::1] v) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(v.shape[0]):
        if not isfinite(v[k]):
            return False
    return True


def descend(t, d, s, w, obs, mask, double lr, long max_iters, double tol, long patience):
    cdef double[::1] tv = np.array(t, dtype=np.float64)
    cdef double[::1] dv = np.array(d, dtype=np.float64)
    cdef double[::1] sv = np.array(s, dtype=np.float64)
    cdef double[::1] wv = np.array(w, dtype=np.float64)
    cdef const double[:, ::1] ov = np.ascontiguousarray(obs, dtype=np.float64)
    cdef const unsigned char[:, ::1] mv = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t B = ov.shape[0], M = ov.shape[1], k
    gt_a = np.zeros(M); gd_a = np.zeros(B); gs_a = np.zeros(B); gw_a = np.zeros(B)
    cdef double[::1] gt = gt_a, gd = gd_a, gs = gs_a, gw = gw_a
    work = np.zeros((3, B))
    cdef double[::1] wa = work[0], wth = work[1], wsp = work[2]
    bt_a = np.array(tv); bd_a = np.array(dv); bs_a = np.array(sv); bw_a = np.array(wv)
    cdef double[::1] bt = bt_a, bd = bd_a, bs = bs_a, bw = bw_a
    cdef double loss, init_loss, best_loss, prev
    cdef long it = 0, stall = 0, diverged = -1
    with nogil:
        loss = _loss_grad(tv, dv, sv, wv, ov, mv, gt, gd, gs, gw, wa, wth, wsp)
        init_loss = loss
        best_loss = loss
        prev = loss
        while it < max_iters:
            it += 1
            for k in range(M):
                tv[k] -= lr * gt[k]
            for k in range(B):
                dv[k] -= lr * gd[k]
                sv[k] -= lr * gs[k]
                wv[k] -= lr * gw[k]
            loss = _loss_grad(tv, dv, sv, wv, ov, mv, gt, gd, gs, gw, wa, wth, wsp)
            if not (isfinite(loss) and _all_finite(gt) and _all_finite(gd)
                    and _all_finite(gs) and _all_finite(gw)):
                diverged = it
                break
            if loss < best_loss:
                best_loss = loss
                bt[:] = tv
                bd[:] = dv
                bs[:] = sv
                bw[:] = wv
            if prev - loss < tol:
                stall += 1
                if stall >= patience:
                    break
            else:
                stall = 0
            prev = loss
    return bt_a, bd_a, bs_a, bw_a, best_loss, init_loss, it, diverged


def best_split(X, y, rows, features, Py_ssize_t min_leaf):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long long[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const long long[::1] fv = np.ascontiguousarray(features, dtype=np.int64)
    cdef Py_ssize_t n = rv.shape[0], p, q, fi
    cdef long long f
    cdef long best_f = -1
    cdef double best_thr = 0.0, best_gain = 0.0
    if n < 2 * min_leaf:
        return best_f, best_thr, best_gain
    cdef double total = 0.0, mean, sse = 0.0, floor, base, sl, sr, nl, gain, fbest, a, b, thr
    cdef Py_ssize_t fpos
    for p in range(n):
        total += yv[rv[p]]
    mean = total / n
    for p in range(n):
        sse += (yv[rv[p]] - mean) * (yv[rv[p]] - mean)
    floor = 1e-12 * (sse if sse > 1.0 else 1.0)
    base = total * total / n
    xs_a = np.empty(n)
    ys_a = np.empty(n)
    cdef double[::1] xs = xs_a, ys = ys_a
    rows_a = np.asarray(rows, dtype=np.int64)
    for fi in range(fv.shape[0]):
        f = fv[fi]
        xcol = np.asarray(X)[rows_a, f]
        order = np.argsort(xcol, kind="mergesort")
        xs_a[:] = xcol[order]
        ys_a[:] = np.asarray(y)[rows_a[order]]
        fbest = -INFINITY
        fpos = -1
        sl = 0.0
        for q in range(min_leaf - 1):
            sl += ys[q]
        for p in range(min_leaf, n - min_leaf + 1):
            sl += ys[p - 1]
            if not (xs[p - 1] < xs[p]):
                continue
            nl = <double>p
            sr = total - sl
            gain = sl * sl / nl + sr * sr / (n - nl) - base
            if gain > fbest:
                fbest = gain
                fpos = p
        if fpos < 0:
            continue
        if fbest > best_gain and fbest > floor:
            a = xs[fpos - 1]
            b = xs[fpos]
            thr = a + (b - a) / 2.0
            if thr >= b:
                thr = a
            best_f = f
            best_thr = thr
            best_gain = fbest
    return best_f, best_thr, best_gain


def interval_votes(lo, hi, weight, band_scores):
    cdef const double[:, ::1] lv = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[:, ::1] hv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(weight, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(band_scores, dtype=np.float64)
    cdef Py_ssize_t N = lv.shape[0], M = lv.shape[1], K = bv.shape[0], i, j, k
    out = np.zeros((N, K))
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(N):
            for j in range(M):
                for k in range(K):
                    if bv[k] >= lv[i, j] and bv[k] <= hv[i, j]:
                        ov[i, k] += wv[i, j]
    return out
