"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from birtcombine import _backend, _kernels_py
from birtcombine.birt import FitConfig, initial_coords
from birtcombine.pipeline import synth_birt_matrix


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    obs, _ = synth_birt_matrix(6, 12, seed=1, noise="beta", samples_per_cell=20)
    start = initial_coords(obs, FitConfig()).arrays()
    mask = obs.mask.astype(np.uint8)
    yield "descend 6x12, 2000 steps", lambda k: k.descend(*start, obs.values, mask, 0.1, 2000, 0.0, 10**9)

    rng = np.random.default_rng(0)
    X = rng.standard_normal((2000, 20))
    y = X[:, 0] * 3 + rng.standard_normal(2000)
    rows = np.arange(2000, dtype=np.int64)
    feats = np.arange(20, dtype=np.int64)
    yield "best_split 2000x20", lambda k: k.best_split(X, y, rows, feats, 5)

    lo = rng.uniform(0, 200, (5000, 8))
    hi = lo + rng.uniform(0, 80, (5000, 8))
    w = rng.uniform(0.5, 1, (5000, 8))
    bands = np.array([0, 40, 80, 120, 160, 200], dtype=float)
    yield "interval_votes 5000x8", lambda k: k.interval_votes(lo, hi, w, bands)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _kernels_py}
    if _backend.NAME == "cython":
        backends["cython"] = _backend.kernels
    else:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':28s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup")
    for label, run in cases():
        t = {b: best_of(lambda: run(k), args.repeat) for b, k in backends.items()}
        speed = f"{t['python'] / t['cython']:8.1f}x" if "cython" in t else ""
        print(f"{label:28s} " + " ".join(f"{v * 1e3:8.2f}ms" for v in t.values()) + "  " + speed)


if __name__ == "__main__":
    main()
