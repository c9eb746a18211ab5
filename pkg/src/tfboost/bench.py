"""Timing comparison of the numba and numpy tree kernels."""

from __future__ import annotations

import time
from typing import Dict, List, Sequence

import numpy as np

from . import kernels

CASES = (
    # (name, n rows, p features, depth)
    ("type-b pool, depth 1", 400, 200, 1),
    ("type-b pool, depth 4", 400, 200, 4),
    ("type-a refit, depth 2", 400, 1, 2),
)


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(repeat: int = 5, seed: int = 0, backends: Sequence[str] = ("numba", "numpy")) -> List[Dict]:
    """Best-of-``repeat`` wall time of each kernel on synthetic inputs.

    Each backend is called once before timing so numba compilation is
    excluded.  Results also record whether the backends built the same tree.
    """
    rng = np.random.default_rng(seed)
    avail = [b for b in backends if b != "numba" or kernels.HAVE_NUMBA]
    rows = []
    for name, n, p, depth in CASES:
        X = rng.standard_normal((n, p))
        y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(n)
        order = kernels.presort(X)
        trees = {}
        row = {"case": name, "n": n, "p": p, "depth": depth}
        for bname in avail:
            be = kernels.get_backend(bname)
            call = lambda: be.build_tree(X, order, y, depth, 5, 0.0, kernels.TIE_TOL)
            trees[bname] = call()
            row[bname] = _best_of(call, repeat)
        if len(trees) == 2:
            a, b = trees.values()
            # leaf means may differ in the last ulp from summation order
            row["identical"] = all(
                np.allclose(u, v, rtol=1e-12, atol=1e-12) if k == 4 else np.array_equal(u, v)
                for k, (u, v) in enumerate(zip(a, b))
            )
            row["speedup"] = row["numpy"] / row["numba"]
        rows.append(row)

    # fused Type A objective: project, sort, grow, score
    S = rng.standard_normal((400, 7))
    u = np.sin(S[:, 0] - S[:, 1]) + 0.1 * rng.standard_normal(400)
    theta = rng.uniform(0.1, 1.0, 6)
    V, V_order = np.zeros((400, 0)), np.zeros((0, 400), np.int64)
    row = {"case": "type-a objective, depth 2", "n": 400, "p": 7, "depth": 2}
    vals = {}
    for bname in avail:
        be = kernels.get_backend(bname)
        call = lambda: be.type_a_sse(S, theta, 1, V, V_order, u, 2, 5, 0.0, kernels.TIE_TOL)
        vals[bname] = call()
        row[bname] = _best_of(call, repeat)
    if len(vals) == 2:
        a, b = vals.values()
        row["identical"] = bool(abs(a - b) <= 1e-9 * max(1.0, abs(a)))
        row["speedup"] = row["numpy"] / row["numba"]
    rows.append(row)
    return rows


def format_rows(rows: List[Dict]) -> str:
    head = f"{'case':<28} {'numba ms':>9} {'numpy ms':>9} {'speedup':>8}  same"
    lines = [head]
    for r in rows:
        nb = f"{1e3 * r['numba']:9.3f}" if "numba" in r else f"{'-':>9}"
        npy = f"{1e3 * r['numpy']:9.3f}" if "numpy" in r else f"{'-':>9}"
        sp = f"{r['speedup']:8.1f}" if "speedup" in r else f"{'-':>8}"
        same = {True: "yes", False: "NO"}.get(r.get("identical"), "-")
        lines.append(f"{r['case']:<28} {nb} {npy} {sp}  {same}")
    return "\n".join(lines) + "\n"
