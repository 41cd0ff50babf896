"""Beta-IRT expectation curve, its gradient-descent fit and derived summaries.

Items are score bands (rows), respondents are models (columns). Observations
are normalised absolute errors, so a *low* ``theta`` marks a good model; the
reporting layer flips this into ``ability = 1 - theta``.

The expected response of respondent ``j`` on item ``i`` is::

    E = 1 / (1 + (delta/(1-delta))**a * (theta/(1-theta))**(-a)),  a = tau * omega

evaluated as ``sigmoid(a * (logit(theta) - logit(delta)))``. The optimiser works on
unconstrained coordinates ``theta = sigmoid(t)``, ``delta = sigmoid(d)``,
``tau = tanh(s)``, ``omega = softplus(w)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._backend import kernels
from ._kernels_py import sigmoid, softplus
from .errors import DomainError, FitError, InputError, NumericError

EPSILON = 1e-4
INIT_RULES = ("rank1", "moment")


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.1
    max_iters: int = 5000
    tol: float = 1e-9
    patience: int = 20
    epsilon: float = EPSILON
    seed: int = 0
    init: str = "rank1"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be at least 1")
        if self.tol < 0:
            raise InputError("tol must be non-negative")
        if self.patience < 1:
            raise InputError("patience must be at least 1")
        if not 0 < self.epsilon < 0.5:
            raise InputError("epsilon must lie in (0, 0.5)")
        if self.init not in INIT_RULES:
            raise InputError(f"init must be one of {INIT_RULES}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "FitConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown fit settings: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ObservationMatrix:
    """Items x respondents responses clamped into ``[eps, 1 - eps]``.

    ``mask`` is True where a cell was observed; unobserved cells hold 0.5 and
    never enter the loss.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        m = np.array(self.mask, dtype=bool)
        if v.ndim != 2 or v.shape != m.shape:
            raise InputError("observation values and mask must be matching 2-D tables")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise InputError(f"need at least 2 items and 2 respondents, got {v.shape}")
        if not m.any():
            raise InputError("observation matrix has no observed cells")
        if not np.all(np.isfinite(v[m])):
            raise InputError("observed cells must be finite")
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_array(cls, values, mask=None, epsilon: float = EPSILON) -> "ObservationMatrix":
        """Clamp ``values``; NaN cells (or ``mask == False``) are treated as missing."""
        v = np.array(values, dtype=float)
        m = np.isfinite(v) if mask is None else np.asarray(mask, dtype=bool) & np.isfinite(v)
        v = np.where(m, np.clip(np.where(m, v, 0.5), epsilon, 1.0 - epsilon), 0.5)
        return cls(v, m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_dict(self) -> dict:
        return {
            "values": [[float(x) if ok else None for x, ok in zip(row, mrow)]
                       for row, mrow in zip(self.values, self.mask)],
        }

    @classmethod
    def from_dict(cls, data: dict, epsilon: float = EPSILON) -> "ObservationMatrix":
        rows = data["values"]
        arr = np.array([[np.nan if x is None else x for x in row] for row in rows], dtype=float)
        return cls.from_array(arr, epsilon=epsilon)


@dataclass(frozen=True)
class RawCoords:
    """Unconstrained optimiser coordinates."""

    t: np.ndarray  # per respondent
    d: np.ndarray  # per item
    s: np.ndarray  # per item
    w: np.ndarray  # per item

    def arrays(self):
        return self.t, self.d, self.s, self.w

    def flat(self) -> np.ndarray:
        return np.concatenate(self.arrays())

    @classmethod
    def from_flat(cls, x, n_items: int, n_resp: int) -> "RawCoords":
        x = np.asarray(x, dtype=float)
        t = x[:n_resp]
        d, s, w = (x[n_resp + k * n_items : n_resp + (k + 1) * n_items] for k in range(3))
        return cls(t.copy(), d.copy(), s.copy(), w.copy())


@dataclass(frozen=True)
class BirtParams:
    theta: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    raw: RawCoords
    final_loss: float
    initial_loss: float = float("nan")
    iters: int = 0
    config: dict = field(default_factory=dict)

    @property
    def discrimination(self) -> np.ndarray:
        return self.tau * self.omega

    @classmethod
    def from_raw(cls, raw: RawCoords, **kw) -> "BirtParams":
        return cls(
            theta=sigmoid(raw.t),
            delta=sigmoid(raw.d),
            tau=np.tanh(raw.s),
            omega=softplus(raw.w),
            raw=raw,
            **kw,
        )

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "delta": self.delta.tolist(),
            "tau": self.tau.tolist(),
            "omega": self.omega.tolist(),
            "raw": {k: getattr(self.raw, k).tolist() for k in ("t", "d", "s", "w")},
            "final_loss": self.final_loss,
            "initial_loss": self.initial_loss,
            "iters": self.iters,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BirtParams":
        try:
            raw = RawCoords(*(np.array(data["raw"][k], dtype=float) for k in ("t", "d", "s", "w")))
            return cls(
                theta=np.array(data["theta"], dtype=float),
                delta=np.array(data["delta"], dtype=float),
                tau=np.array(data["tau"], dtype=float),
                omega=np.array(data["omega"], dtype=float),
                raw=raw,
                final_loss=float(data["final_loss"]),
                initial_loss=float(data.get("initial_loss", float("nan"))),
                iters=int(data["iters"]),
                config=dict(data.get("config", {})),
            )
        except KeyError as exc:
            raise InputError(f"parameter file missing field {exc}") from None


def dumps_params(params: BirtParams) -> str:
    return json.dumps(params.to_dict(), indent=2, sort_keys=True)


def loads_params(text: str) -> BirtParams:
    return BirtParams.from_dict(json.loads(text))


def save_params(params: BirtParams, path: str | Path) -> None:
    Path(path).write_text(dumps_params(params) + "\n")


def load_params(path: str | Path) -> BirtParams:
    return loads_params(Path(path).read_text())


def icc_expectation(theta, delta, a):
    """Expected response for ability ``theta``, difficulty ``delta`` and discrimination ``a``.

    Broadcasts over arrays. ``theta`` and ``delta`` must lie strictly inside (0, 1).
    """
    th = np.asarray(theta, dtype=float)
    de = np.asarray(delta, dtype=float)
    if np.any(~((th > 0) & (th < 1))) or np.any(~((de > 0) & (de < 1))):
        raise DomainError("theta and delta must lie strictly inside (0, 1)")
    z = np.asarray(a, dtype=float) * (logit(th) - logit(de))
    out = sigmoid(np.atleast_1d(z)).reshape(np.shape(z))
    return float(out) if out.ndim == 0 else out


def birt_loss_and_gradients(raw: RawCoords, obs: ObservationMatrix):
    """Mean squared residual over observed cells and its gradient in raw coordinates."""
    for name, v in zip("tdsw", raw.arrays()):
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise NumericError(f"non-finite raw coordinate {name}[{bad[0]}]")
    loss, gt, gd, gs, gw = kernels.loss_grad(*raw.arrays(), obs.values, obs.mask.astype(np.uint8))
    if not math.isfinite(loss):
        raise NumericError("loss is not finite")
    for name, g in zip("tdsw", (gt, gd, gs, gw)):
        bad = np.flatnonzero(~np.isfinite(g))
        if bad.size:
            raise NumericError(f"non-finite gradient for {name}[{bad[0]}]")
    return loss, RawCoords(gt, gd, gs, gw)


def _to_raw(a: np.ndarray, b: np.ndarray, t: np.ndarray) -> RawCoords:
    """Map logit-space slopes ``a`` and offsets ``b`` (logit E = a*t + b) to raw coordinates."""
    a = np.where(np.abs(a) < 1e-3, np.where(a < 0, -1e-3, 1e-3), a)
    d = np.clip(-b / a, -30.0, 30.0)
    s = np.arctanh(np.where(a < 0, -0.5, 0.5))
    w = softplus_inv(np.abs(a) / 0.5)
    return RawCoords(np.array(t, dtype=float), d, s, w)


def moment_init(obs: ObservationMatrix, epsilon: float = EPSILON) -> RawCoords:
    """Warm start from row and column means of the observed cells."""
    v, m = obs.values, obs.mask
    col = np.array([v[m[:, j], j].mean() if m[:, j].any() else 0.5 for j in range(v.shape[1])])
    row = np.array([v[i, m[i]].mean() if m[i].any() else 0.5 for i in range(v.shape[0])])
    t = logit(np.clip(col, epsilon, 1 - epsilon))
    d = logit(np.clip(row, epsilon, 1 - epsilon))
    B = v.shape[0]
    return RawCoords(t, d, np.full(B, np.arctanh(0.5)), np.full(B, float(softplus_inv(1.0))))


def _svd_rank1(L: np.ndarray, use: np.ndarray):
    """Rank-1 fit of row-centred logits, missing cells filled with their row mean."""
    B, M = L.shape
    rm = np.array([L[i, use[i]].mean() if use[i].any() else np.nan for i in range(B)])
    rm = np.where(np.isnan(rm), np.nanmean(rm) if np.isfinite(rm).any() else 0.0, rm)
    F = np.where(use, L, rm[:, None])
    b = F.mean(axis=1)
    U, S, Vt = np.linalg.svd(F - b[:, None], full_matrices=False)
    u, v = U[:, 0], Vt[0]
    if u.sum() < 0:
        u, v = -u, -v
    sd = v.std()
    if sd == 0:
        return np.zeros(B), b, np.zeros(M)
    return S[0] * u * sd, b + S[0] * u * v.mean(), (v - v.mean()) / sd


def _als_rank1(L: np.ndarray, use: np.ndarray, a, b, t, sweeps: int = 100):
    """Alternating least squares for ``logit E = a_i * t_j + b_i`` on usable cells only."""
    a, b, t = a.copy(), b.copy(), t.copy()
    B, M = L.shape
    for _ in range(sweeps):
        for i in range(B):
            o = use[i]
            if o.sum() >= 2 and np.ptp(t[o]) > 0:
                A = np.stack([t[o], np.ones(o.sum())], axis=1)
                a[i], b[i] = np.linalg.lstsq(A, L[i, o], rcond=None)[0]
        for j in range(M):
            o = use[:, j]
            den = float(a[o] @ a[o])
            if den > 0:
                t[j] = float(a[o] @ (L[o, j] - b[o])) / den
        mu, sd = t.mean(), t.std()
        if sd == 0:
            break
        b = b + a * mu
        a = a * sd
        t = (t - mu) / sd
    return a, b, t


def rank1_candidates(obs: ObservationMatrix, epsilon: float = EPSILON) -> list[RawCoords]:
    """Warm starts from the logit-space structure ``logit E = a_i * (t_j - d_i)``.

    Cells sitting on the clamp bounds carry no slope information and are left
    out of the fit when a row has enough other cells.
    """
    v, m = obs.values, obs.mask
    L = logit(np.clip(v, epsilon, 1 - epsilon))
    unsat = m & (v > epsilon) & (v < 1 - epsilon)
    rows_ok = unsat.sum(axis=1) >= 2
    use = np.where(rows_ok[:, None], unsat, m)
    a, b, t = _svd_rank1(L, use)
    cands = [_to_raw(a, b, t)]
    complete = use.all(axis=1)
    if complete.sum() >= 2:
        # column structure from fully usable rows only; the others are regressed in the sweeps
        _, _, tc = _svd_rank1(L[complete], use[complete])
        if tc.std() > 0:
            t = tc
    a2, b2, t2 = _als_rank1(L, use, a, b, t)
    empty = ~m.any(axis=1)
    if empty.any() and (~empty).any():
        # bands without any observation borrow the average item
        a2[empty] = np.abs(a2[~empty]).mean()
        b2[empty] = b2[~empty].mean()
    if np.all(np.isfinite(a2)) and np.all(np.isfinite(b2)) and np.all(np.isfinite(t2)):
        cands.insert(0, _to_raw(a2, b2, t2))
    return cands


def initial_coords(obs: ObservationMatrix, config: FitConfig) -> RawCoords:
    cands = [moment_init(obs, config.epsilon)]
    if config.init == "rank1":
        cands = rank1_candidates(obs, config.epsilon) + cands
    mask = obs.mask.astype(np.uint8)
    losses = [kernels.loss_grad(*c.arrays(), obs.values, mask)[0] for c in cands]
    losses = [x if math.isfinite(x) else math.inf for x in losses]
    return cands[int(np.argmin(losses))]


def _canonical_sign(raw: RawCoords) -> RawCoords:
    """Resolve the (a, t, d) -> (-a, -t, -d) symmetry so that error grows with theta on balance."""
    a = np.tanh(raw.s) * softplus(raw.w)
    if a.sum() < 0:
        return RawCoords(-raw.t, -raw.d, -raw.s, raw.w.copy())
    return raw


def fit_birt(obs: ObservationMatrix, config: FitConfig | None = None) -> BirtParams:
    """Full-batch gradient descent on the masked squared-error loss.

    Stops after ``max_iters`` steps or once the per-step loss improvement stays
    below ``tol`` for ``patience`` consecutive steps. The best iterate is
    returned, so ``final_loss <= initial_loss`` always holds.
    """
    config = config or FitConfig()
    start = initial_coords(obs, config)
    t, d, s, w, best, init, iters, diverged = kernels.descend(
        *start.arrays(),
        obs.values,
        obs.mask.astype(np.uint8),
        float(config.learning_rate),
        int(config.max_iters),
        float(config.tol),
        int(config.patience),
    )
    if diverged >= 0:
        raise FitError(
            f"gradient descent diverged at iteration {diverged}; retry with a smaller learning rate",
            iteration=int(diverged),
        )
    raw = _canonical_sign(RawCoords(np.asarray(t), np.asarray(d), np.asarray(s), np.asarray(w)))
    return BirtParams.from_raw(
        raw,
        final_loss=float(best),
        initial_loss=float(init),
        iters=int(iters),
        config=asdict(config),
    )


def error_expectation(params: BirtParams) -> np.ndarray:
    """Items x respondents table of fitted expected normalised errors."""
    eps = float(params.config.get("epsilon", EPSILON))
    a = np.tanh(params.raw.s) * softplus(params.raw.w)
    z = a[:, None] * (params.raw.t[None, :] - params.raw.d[:, None])
    return np.clip(sigmoid(z), eps, 1.0 - eps)


def reconstruction_rmse(params: BirtParams, obs: ObservationMatrix) -> float:
    e = error_expectation(params)
    r = (obs.values - e)[obs.mask]
    return float(np.sqrt(np.mean(r * r)))


def ability_report(params: BirtParams, model_ids=None, item_labels=None) -> dict:
    """Per-model abilities (``1 - theta``: higher means lower expected error) and item parameters."""
    M = params.theta.size
    B = params.delta.size
    model_ids = list(model_ids) if model_ids is not None else [str(j) for j in range(M)]
    item_labels = list(item_labels) if item_labels is not None else [str(i) for i in range(B)]
    return {
        "models": [
            {"id": model_ids[j], "theta": float(params.theta[j]), "ability": float(1.0 - params.theta[j])}
            for j in range(M)
        ],
        "items": [
            {
                "label": item_labels[i],
                "difficulty": float(params.delta[i]),
                "discrimination": float(params.tau[i] * params.omega[i]),
                "tau": float(params.tau[i]),
                "omega": float(params.omega[i]),
            }
            for i in range(B)
        ],
    }
