"""Functional multi-index trees.

Both tree types work on basis scores ``s_i = <x_i, psi>`` (an ``n x d``
matrix).  A direction ``c`` (unit norm, canonical sign) turns scores into
one projected feature ``s_i @ c``; scalar covariates, when present, are
appended as extra columns after the projected features.

* Type A optimizes ``K`` directions jointly.  The objective is the training
  SSE of a tree refit on the projected features, minimized over spherical
  angles with multi-start Nelder-Mead.
* Type B draws a fresh pool of ``P`` random directions and lets CART choose
  among all pool projections at every split.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import kernels
from .cart import Tree, TreeConfig, fit_tree, predict_tree
from .errors import DimensionError, DomainError
from .geometry import angle_box, coeffs_from_angles, sample_directions
from .optimizer import Box, NmConfig, multi_start


@dataclass(frozen=True)
class MultiStartConfig:
    n_starts: int = 30
    probe_steps: int = 10
    n_survivors: int = 5
    nm: NmConfig = NmConfig()


@dataclass(eq=False)
class MultiIndexTree:
    """A tree over projected features ``scores @ directions.T`` (plus scalars)."""

    kind: str  # "A" or "B"
    directions: np.ndarray  # (n_directions, d)
    tree: Tree
    n_scalars: int = 0
    pool_size: Optional[int] = None  # P for Type B, before compaction
    objective: float = float("nan")

    def __post_init__(self):
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        if self.tree.n_features != self.directions.shape[0] + self.n_scalars:
            raise DimensionError(
                f"tree has {self.tree.n_features} features but model provides "
                f"{self.directions.shape[0]} directions + {self.n_scalars} scalars"
            )

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def K(self) -> int:
        return self.directions.shape[0]

    def features(self, scores, scalars=None) -> np.ndarray:
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        if scores.shape[1] != self.d:
            raise DimensionError(f"model expects {self.d} basis scores, got {scores.shape[1]}")
        F = scores @ self.directions.T
        if self.n_scalars:
            if scalars is None:
                raise DimensionError(f"model expects {self.n_scalars} scalar covariates")
            scalars = np.asarray(scalars, dtype=np.float64).reshape(scores.shape[0], -1)
            if scalars.shape[1] != self.n_scalars:
                raise DimensionError(
                    f"model expects {self.n_scalars} scalar covariates, got {scalars.shape[1]}"
                )
            F = np.hstack([F, scalars])
        elif scalars is not None and np.asarray(scalars).size:
            raise DimensionError("model was fitted without scalar covariates")
        return F

    def compact(self) -> "MultiIndexTree":
        """Drop directions no split uses, renumbering tree columns."""
        K = self.K
        used = self.tree.used_features()
        used_dirs = used[used < K]
        mapping = np.full(self.tree.n_features, -1, np.int64)
        mapping[used_dirs] = np.arange(used_dirs.size)
        mapping[K:] = used_dirs.size + np.arange(self.n_scalars)
        tree = self.tree.remap_features(mapping, used_dirs.size + self.n_scalars)
        keep_dirs = self.directions[used_dirs] if used_dirs.size else np.zeros((0, self.d))
        return replace(self, directions=keep_dirs, tree=tree)

    def flip_direction(self, k: int) -> "MultiIndexTree":
        """Equivalent model with direction ``k`` negated."""
        dirs = self.directions.copy()
        dirs[k] = -dirs[k]
        return replace(self, directions=dirs, tree=self.tree.negate_feature(k))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "directions": self.directions.tolist(),
            "tree": self.tree.to_dict(),
            "n_scalars": int(self.n_scalars),
            "pool_size": self.pool_size,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MultiIndexTree":
        dirs = np.asarray(doc["directions"], dtype=np.float64)
        if dirs.size == 0:
            dirs = dirs.reshape(0, 0)
        tree = Tree.from_dict(doc["tree"])
        return cls(doc["kind"], dirs, tree, int(doc["n_scalars"]), doc.get("pool_size"))


def _check_inputs(scores, scalars, residuals):
    S = np.ascontiguousarray(np.atleast_2d(np.asarray(scores, dtype=np.float64)))
    u = np.ascontiguousarray(np.asarray(residuals, dtype=np.float64).ravel())
    n = S.shape[0]
    if u.size != n:
        raise DimensionError(f"{u.size} residuals for {n} score rows")
    V = None
    if scalars is not None:
        V = np.asarray(scalars, dtype=np.float64).reshape(n, -1)
        if V.shape[1] == 0:
            V = None
    return S, V, u


def _directions_from_angles(theta: np.ndarray, K: int, d: int) -> np.ndarray:
    if d == 1:
        return np.ones((K, 1))
    return np.vstack([coeffs_from_angles(block) for block in theta.reshape(K, d - 1)])


class TypeAObjective:
    """Training SSE of a refit tree as a function of the concatenated angles."""

    def __init__(self, scores, scalars, residuals, K: int, tree_cfg: TreeConfig, backend=None):
        self.S, self.V, self.u = scores, scalars, residuals
        self.K, self.d = K, scores.shape[1]
        self.cfg = tree_cfg
        self.be = backend or kernels.backend
        n = scores.shape[0]
        self._X = np.empty((n, K + (0 if scalars is None else scalars.shape[1])))
        if scalars is not None:
            self._X[:, K:] = scalars
            self._scalar_order = kernels.presort(scalars)
        # dense placeholders keep the fused kernel's signature fixed
        self._V = np.ascontiguousarray(scalars) if scalars is not None else np.zeros((n, 0))
        self._V_order = self._scalar_order if scalars is not None else np.zeros((0, n), np.int64)
        self.evaluations = 0

    def _build(self, theta):
        C = _directions_from_angles(np.asarray(theta, dtype=np.float64), self.K, self.d)
        X = self._X
        np.matmul(self.S, C.T, out=X[:, : self.K])
        proj_order = kernels.presort(X[:, : self.K])
        order = proj_order if self.V is None else np.vstack([proj_order, self._scalar_order])
        cfg = self.cfg
        out = self.be.build_tree(X, order, self.u, int(cfg.max_depth), int(cfg.min_node),
                                 float(cfg.min_split_improvement), kernels.TIE_TOL)
        fitted = out[4][out[6]]
        r = self.u - fitted
        return out, fitted, float(r @ r)

    def __call__(self, theta) -> float:
        self.evaluations += 1
        cfg = self.cfg
        return self.be.type_a_sse(self.S, theta, self.K, self._V, self._V_order, self.u,
                                  int(cfg.max_depth), int(cfg.min_node),
                                  float(cfg.min_split_improvement), kernels.TIE_TOL)

    def fit(self, theta) -> Tree:
        out, fitted, sse = self._build(theta)
        feat, thr, left, right, value, count, _ = out
        return Tree(feat, thr, left, right, value, count, self._X.shape[1], sse, fitted)


def fit_type_a(
    scores,
    scalars,
    residuals,
    K: int,
    tree_cfg: TreeConfig,
    rng: np.random.Generator,
    ms_cfg: MultiStartConfig = MultiStartConfig(),
    backend=None,
) -> MultiIndexTree:
    """Fit a Type A tree: ``K`` directions chosen to minimize the whole tree's SSE."""
    S, V, u = _check_inputs(scores, scalars, residuals)
    if K < 1:
        raise DomainError("K must be >= 1")
    if S.shape[0] < 2 * tree_cfg.min_node:
        raise DomainError(f"need at least {2 * tree_cfg.min_node} rows, got {S.shape[0]}")
    d = S.shape[1]
    obj = TypeAObjective(S, V, u, K, tree_cfg, backend)
    if d == 1:
        theta = np.zeros(0)
        fun = obj(theta)
    else:
        lo, hi = angle_box(d)
        box = Box(np.tile(lo, K), np.tile(hi, K))
        res = multi_start(obj, box, rng, ms_cfg.n_starts, ms_cfg.probe_steps,
                          ms_cfg.n_survivors, ms_cfg.nm)
        theta, fun = res.x, res.fun
    C = _directions_from_angles(theta, K, d)
    tree = obj.fit(theta)
    return MultiIndexTree("A", C, tree, 0 if V is None else V.shape[1], None, fun)


def fit_type_b(
    scores,
    scalars,
    residuals,
    P: int,
    tree_cfg: TreeConfig,
    rng: np.random.Generator,
    pool: Optional[np.ndarray] = None,
    backend=None,
) -> MultiIndexTree:
    """Fit a Type B tree on the projections onto a fresh random pool of ``P`` directions.

    ``pool`` overrides the random draw (rows must be canonical unit vectors).
    """
    S, V, u = _check_inputs(scores, scalars, residuals)
    if pool is None:
        if P < 1:
            raise DomainError("pool size must be >= 1")
        pool = sample_directions(S.shape[1], P, rng)
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    X = S @ pool.T
    if V is not None:
        X = np.hstack([X, V])
    tree = fit_tree(X, u, tree_cfg, backend=backend)
    return MultiIndexTree("B", pool, tree, 0 if V is None else V.shape[1], pool.shape[0],
                          tree.train_sse)


def predict_mit(model: MultiIndexTree, scores, scalars=None, backend=None) -> np.ndarray:
    return predict_tree(model.tree, model.features(scores, scalars), backend=backend)
