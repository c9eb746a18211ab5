"""Hot loops of the regression-tree learner.

Two interchangeable implementations of the same greedy squared-error tree
builder and router live here:

* ``numba``: level-synchronous scan over presorted feature columns,
  compiled with ``@njit``;
* ``numpy``: per-node vectorized scan with cumulative sums.

Set ``TFBOOST_BACKEND=numpy`` to force the fallback.  Without the variable,
numba is used when it imports.

Both builders pick, at every node, the split with the largest reduction in
squared error.  Candidates whose reduction is within ``tie_tol * SST`` of
the best are ties; among these the lowest feature index and then the lowest
threshold wins.  A node whose responses are all equal is never split.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

TIE_TOL = 1e-10

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature stable sort order, shape (p, n)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _midpoint(a, b):
    t = 0.5 * (a + b)
    if t >= b:
        t = a
    return t


# ---------------------------------------------------------------------------
# numpy fallback


def build_tree_numpy(X, order, y, max_depth, min_node, min_improve, tie_tol=TIE_TOL):
    n, p = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, np.int64)

    ybar = y.mean()
    yc = y - ybar
    node_of = np.zeros(n, np.int64)
    value[0] = ybar
    count[0] = n
    n_nodes = 1
    frontier = [0]
    for _ in range(max_depth):
        nxt = []
        for k in frontier:
            rows = np.flatnonzero(node_of == k)
            m = rows.size
            if m < 2 * min_node:
                continue
            yr = yc[rows]
            if yr.max() == yr.min():
                continue
            # center within the node so the gain has no cancellation error
            yr = yr - yr.mean()
            Xs = X[rows]
            o = np.argsort(Xs, axis=0, kind="stable")
            xs = np.take_along_axis(Xs, o, axis=0)
            ys = yr[o]
            tot = yr.sum()
            sst = (yr ** 2).sum() - tot * tot / m
            tol = tie_tol * max(sst, 1e-300)
            cs = np.cumsum(ys, axis=0)[:-1]
            nl = np.arange(1, m, dtype=np.float64)[:, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                gain = cs * cs / nl + (tot - cs) ** 2 / (m - nl) - tot * tot / m
            ok = (xs[1:] > xs[:-1]) & (nl >= min_node) & (m - nl >= min_node)
            gain = np.where(ok, gain, -np.inf)
            best = gain.max() if gain.size else -np.inf
            if not best > max(min_improve, tol):
                continue
            flat = np.argmax((gain >= best - tol).T)
            j, i = divmod(int(flat), m - 1)
            thr = _midpoint(xs[i, j], xs[i + 1, j])
            feature[k] = j
            threshold[k] = thr
            left[k], right[k] = n_nodes, n_nodes + 1
            goes_left = X[rows, j] <= thr
            for child, sel in ((n_nodes, rows[goes_left]), (n_nodes + 1, rows[~goes_left])):
                node_of[sel] = child
                count[child] = sel.size
                value[child] = y[sel].sum() / sel.size
                nxt.append(child)
            n_nodes += 2
        if not nxt:
            break
        frontier = nxt
    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        count[:n_nodes],
        node_of,
    )


def predict_tree_numpy(feature, threshold, left, right, value, X):
    n = X.shape[0]
    k = np.zeros(n, np.int64)
    rows = np.arange(n)
    while True:
        f = feature[k]
        internal = f >= 0
        if not internal.any():
            break
        xv = X[rows, np.maximum(f, 0)]
        step = np.where(xv <= threshold[k], left[k], right[k])
        k = np.where(internal, step, k)
    return value[k]


# ---------------------------------------------------------------------------
# numba


def _build_tree_loops(X, order, y, max_depth, min_node, min_improve, tie_tol):
    n, p = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, np.int64)

    ybar = y.mean()
    value[0] = ybar
    yc = y - ybar
    count[0] = n
    node_of = np.zeros(n, np.int64)
    n_nodes = 1
    lo, hi = 0, 1  # node ids of the current level are lo .. hi-1

    for _ in range(max_depth):
        nl_ = hi - lo
        tot_c = np.zeros(nl_, np.int64)
        mu = np.zeros(nl_)
        ymin = np.full(nl_, np.inf)
        ymax = np.full(nl_, -np.inf)
        for r in range(n):
            s = node_of[r] - lo
            if s >= 0:
                tot_c[s] += 1
                mu[s] += yc[r]
                ymin[s] = min(ymin[s], yc[r])
                ymax[s] = max(ymax[s], yc[r])
        for s in range(nl_):
            if tot_c[s] > 0:
                mu[s] /= tot_c[s]
        # sums of responses centered within each node, free of cancellation
        tot_s = np.zeros(nl_)
        tot_ss = np.zeros(nl_)
        for r in range(n):
            s = node_of[r] - lo
            if s >= 0:
                d = yc[r] - mu[s]
                tot_s[s] += d
                tot_ss[s] += d * d
        active = np.zeros(nl_, np.bool_)
        tol = np.zeros(nl_)
        any_active = False
        for s in range(nl_):
            if tot_c[s] >= 2 * min_node and ymax[s] > ymin[s]:
                active[s] = True
                any_active = True
                sst = tot_ss[s] - tot_s[s] * tot_s[s] / tot_c[s]
                tol[s] = tie_tol * max(sst, 1e-300)
        if not any_active:
            break

        best = np.full(nl_, -np.inf)
        run_c = np.zeros(nl_, np.int64)
        run_s = np.zeros(nl_)
        last = np.zeros(nl_)
        for j in range(p):
            run_c[:] = 0
            run_s[:] = 0.0
            for idx in range(n):
                r = order[j, idx]
                s = node_of[r] - lo
                if s < 0 or not active[s]:
                    continue
                v = X[r, j]
                c = run_c[s]
                if c >= min_node and tot_c[s] - c >= min_node and v > last[s]:
                    sl = run_s[s]
                    sr = tot_s[s] - sl
                    g = sl * sl / c + sr * sr / (tot_c[s] - c) - tot_s[s] * tot_s[s] / tot_c[s]
                    if g > best[s]:
                        best[s] = g
                run_c[s] = c + 1
                run_s[s] = run_s[s] + (yc[r] - mu[s])
                last[s] = v

        # second pass: first candidate (feature, threshold order) within tol of best
        chosen_f = np.full(nl_, -1, np.int64)
        chosen_t = np.zeros(nl_)
        want = np.zeros(nl_, np.bool_)
        any_want = False
        for s in range(nl_):
            if active[s] and best[s] > max(min_improve, tol[s]):
                want[s] = True
                any_want = True
        if not any_want:
            break
        for j in range(p):
            run_c[:] = 0
            run_s[:] = 0.0
            for idx in range(n):
                r = order[j, idx]
                s = node_of[r] - lo
                if s < 0 or not want[s]:
                    continue
                v = X[r, j]
                c = run_c[s]
                if chosen_f[s] < 0 and c >= min_node and tot_c[s] - c >= min_node and v > last[s]:
                    sl = run_s[s]
                    sr = tot_s[s] - sl
                    g = sl * sl / c + sr * sr / (tot_c[s] - c) - tot_s[s] * tot_s[s] / tot_c[s]
                    if g >= best[s] - tol[s]:
                        chosen_f[s] = j
                        t = 0.5 * (last[s] + v)
                        if t >= v:
                            t = last[s]
                        chosen_t[s] = t
                run_c[s] = c + 1
                run_s[s] = run_s[s] + (yc[r] - mu[s])
                last[s] = v

        new_lo = n_nodes
        for s in range(nl_):
            if chosen_f[s] >= 0:
                k = lo + s
                feature[k] = chosen_f[s]
                threshold[k] = chosen_t[s]
                left[k] = n_nodes
                right[k] = n_nodes + 1
                n_nodes += 2
        sums = np.zeros(n_nodes - new_lo)
        for r in range(n):
            k = node_of[r]
            if k >= lo and feature[k] >= 0:
                if X[r, feature[k]] <= threshold[k]:
                    k = left[k]
                else:
                    k = right[k]
                node_of[r] = k
                count[k] += 1
                sums[k - new_lo] += y[r]
        for k in range(new_lo, n_nodes):
            value[k] = sums[k - new_lo] / count[k]
        lo, hi = new_lo, n_nodes

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        count[:n_nodes],
        node_of,
    )


def _predict_tree_loops(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        k = 0
        while feature[k] >= 0:
            if X[r, feature[k]] <= threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[r] = value[k]
    return out


def type_a_sse_numpy(S, theta, K, V, V_order, u, max_depth, min_node, min_improve, tie_tol):
    """SSE of the tree refit on projections of ``S`` onto angle-encoded directions."""
    d = S.shape[1]
    C = np.empty((K, d))
    for k in range(K):
        t = theta[k * (d - 1) : (k + 1) * (d - 1)]
        s = np.concatenate(([1.0], np.cumprod(np.sin(t))))
        s[:-1] *= np.cos(t)
        C[k] = s
    X = S @ C.T
    order = presort(X)
    if V.shape[1]:
        X = np.hstack([X, V])
        order = np.vstack([order, V_order])
    out = build_tree_numpy(X, order, u, max_depth, min_node, min_improve, tie_tol)
    r = u - out[4][out[6]]
    return float(r @ r)


def _type_a_sse_loops(S, theta, K, V, V_order, u, max_depth, min_node, min_improve, tie_tol):
    n, d = S.shape
    q = V.shape[1]
    X = np.empty((n, K + q))
    order = np.empty((K + q, n), np.int64)
    c = np.empty(d)
    for k in range(K):
        s = 1.0
        for l in range(d - 1):
            a = theta[k * (d - 1) + l]
            c[l] = s * np.cos(a)
            s *= np.sin(a)
        c[d - 1] = s
        for r in range(n):
            acc = 0.0
            for l in range(d):
                acc += S[r, l] * c[l]
            X[r, k] = acc
        order[k] = np.argsort(X[:, k], kind="mergesort")
    for k in range(q):
        X[:, K + k] = V[:, k]
        order[K + k] = V_order[k]
    out = _build_tree_jit(X, order, u, max_depth, min_node, min_improve, tie_tol)
    value = out[4]
    leaf_of = out[6]
    sse = 0.0
    for r in range(n):
        e = u[r] - value[leaf_of[r]]
        sse += e * e
    return sse


numpy_backend = SimpleNamespace(
    name="numpy",
    build_tree=build_tree_numpy,
    predict_tree=predict_tree_numpy,
    type_a_sse=type_a_sse_numpy,
)

if HAVE_NUMBA:
    _build_tree_jit = numba.njit(cache=True)(_build_tree_loops)
    numba_backend = SimpleNamespace(
        name="numba",
        build_tree=_build_tree_jit,
        predict_tree=numba.njit(cache=True)(_predict_tree_loops),
        type_a_sse=numba.njit(cache=True)(_type_a_sse_loops),
    )
else:  # pragma: no cover
    numba_backend = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Resolve a backend by name, defaulting to ``$TFBOOST_BACKEND``."""
    if name is None:
        name = os.environ.get("TFBOOST_BACKEND", "numba" if HAVE_NUMBA else "numpy")
    name = name.strip().lower()
    if name == "numba":
        if numba_backend is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return numba_backend
    if name == "numpy":
        return numpy_backend
    raise ValueError(f"unknown backend {name!r}; choose 'numba' or 'numpy'")


backend = get_backend()
