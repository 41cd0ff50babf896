"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``BIRTCOMBINE_PURE_PYTHON`` is set. Signatures and semantics match the
Cython module exactly; tests run both side by side.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def loss_grad(t, d, s, w, obs, mask):
    """Masked mean squared residual of the Beta-IRT expectation and its gradient.

    ``obs`` is items x respondents; ``t`` (respondents) and ``d``, ``s``, ``w``
    (items) are the unconstrained coordinates.
    """
    th = np.tanh(s)
    sp = softplus(w)
    a = th * sp
    diff = t[None, :] - d[:, None]
    e = sigmoid(a[:, None] * diff)
    m = mask.astype(bool)
    n = int(m.sum())
    r = np.where(m, obs - e, 0.0)
    loss = float((r * r).sum()) / n
    g = -2.0 * r * e * (1.0 - e) / n
    ga_row = g * a[:, None]
    gt = ga_row.sum(axis=0)
    gd = -ga_row.sum(axis=1)
    gam = (g * diff).sum(axis=1)
    gs = gam * (1.0 - th * th) * sp
    gw = gam * th * sigmoid(w)
    return loss, gt, gd, gs, gw


def descend(t, d, s, w, obs, mask, lr, max_iters, tol, patience):
    """Full-batch gradient descent keeping the best iterate.

    Returns ``(t, d, s, w, best_loss, initial_loss, iters, diverged_at)`` where
    ``diverged_at`` is -1 unless the loss became non-finite.
    """
    t, d, s, w = (np.array(v, dtype=float) for v in (t, d, s, w))
    loss, gt, gd, gs, gw = loss_grad(t, d, s, w, obs, mask)
    init_loss = loss
    best = (t.copy(), d.copy(), s.copy(), w.copy())
    best_loss = loss
    prev = loss
    stall = 0
    it = 0
    while it < max_iters:
        it += 1
        t -= lr * gt
        d -= lr * gd
        s -= lr * gs
        w -= lr * gw
        loss, gt, gd, gs, gw = loss_grad(t, d, s, w, obs, mask)
        if not np.isfinite(loss) or not (
            np.all(np.isfinite(gt)) and np.all(np.isfinite(gd))
            and np.all(np.isfinite(gs)) and np.all(np.isfinite(gw))
        ):
            return (*best, best_loss, init_loss, it, it)
        if loss < best_loss:
            best = (t.copy(), d.copy(), s.copy(), w.copy())
            best_loss = loss
        if prev - loss < tol:
            stall += 1
            if stall >= patience:
                break
        else:
            stall = 0
        prev = loss
    return (*best, best_loss, init_loss, it, -1)


def best_split(X, y, rows, features, min_leaf):
    """Greedy variance-reduction split of the node holding ``rows``.

    Returns ``(feature, threshold, gain)``; feature is -1 when no admissible
    split improves the node. Samples with ``x <= threshold`` go left.
    """
    yn = y[rows]
    n = yn.shape[0]
    best_f, best_thr, best_gain = -1, 0.0, 0.0
    if n < 2 * min_leaf:
        return best_f, best_thr, best_gain
    # sequential sum, matching the compiled kernel bit for bit
    total = float(np.cumsum(yn)[-1])
    mean = total / n
    sse = float(((yn - mean) ** 2).sum())
    floor = 1e-12 * max(1.0, sse)
    base = total * total / n
    pos = np.arange(min_leaf, n - min_leaf + 1)
    if pos.size == 0:
        return best_f, best_thr, best_gain
    for f in features:
        xv = X[rows, f]
        order = np.argsort(xv, kind="mergesort")
        xs = xv[order]
        cs = np.cumsum(yn[order])
        nl = pos.astype(float)
        sl = cs[pos - 1]
        sr = total - sl
        gain = sl * sl / nl + sr * sr / (n - nl) - base
        valid = xs[pos - 1] < xs[pos]
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > best_gain and gain[j] > floor:
            p = pos[j]
            a, b = xs[p - 1], xs[p]
            thr = a + (b - a) / 2.0
            if thr >= b:
                thr = a
            best_f, best_thr, best_gain = int(f), float(thr), float(gain[j])
    return best_f, best_thr, best_gain


def interval_votes(lo, hi, weight, band_scores):
    """``votes[n, k]`` = sum of ``weight[n, m]`` over models whose interval holds band k."""
    n, m = lo.shape
    votes = np.zeros((n, band_scores.shape[0]))
    for j in range(m):
        inside = (band_scores[None, :] >= lo[:, j : j + 1]) & (band_scores[None, :] <= hi[:, j : j + 1])
        votes += np.where(inside, weight[:, j : j + 1], 0.0)
    return votes
