"""Box-constrained Nelder-Mead and the multi-start protocol used for Type A trees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).ravel()
        hi = np.asarray(self.upper, dtype=np.float64).ravel()
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise DomainError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lower + rng.random((size, self.dim)) * self.width


@dataclass(frozen=True)
class NmConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_iter: Optional[int] = None  # None -> 500 * dim
    f_tol: float = 1e-8
    x_tol: float = 1e-8
    init_step: float = 0.05  # fraction of box width for the initial simplex

    def __post_init__(self):
        if min(self.reflection, self.expansion, self.contraction, self.shrink) <= 0:
            raise DomainError("Nelder-Mead coefficients must be positive")
        if self.expansion <= 1 or self.contraction >= 1 or self.shrink >= 1:
            raise DomainError("need expansion > 1 and contraction, shrink < 1")


@dataclass
class NmResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    simplex: np.ndarray
    fvals: np.ndarray
    f_start: float = float("nan")


def initial_simplex(start: np.ndarray, box: Box, step: float) -> np.ndarray:
    D = start.size
    simplex = np.tile(start, (D + 1, 1))
    for i in range(D):
        h = step * box.width[i]
        v = start[i] + h
        if v > box.upper[i]:
            v = start[i] - h
        simplex[i + 1, i] = v
    return box.clip(simplex)


def nelder_mead(
    f: Callable[[np.ndarray], float],
    start,
    box: Box,
    cfg: NmConfig = NmConfig(),
    max_iter: Optional[int] = None,
    simplex: Optional[np.ndarray] = None,
    fvals: Optional[np.ndarray] = None,
) -> NmResult:
    """Minimize ``f`` over ``box`` with the Nelder-Mead simplex method.

    Every trial point is clipped into the box before evaluation.  The search
    stops after ``max_iter`` iterations or once both the spread of function
    values and the spread of vertices drop below the tolerances.  Passing
    ``simplex``/``fvals`` from an earlier result resumes that search.
    """
    D = box.dim
    if max_iter is None:
        max_iter = cfg.max_iter if cfg.max_iter is not None else 500 * D
    nevals = 0
    f0 = float("nan")
    if simplex is None:
        x0 = np.asarray(start, dtype=np.float64).ravel()
        if x0.size != D:
            raise DomainError(f"start has {x0.size} coordinates, box has {D}")
        if not box.contains(x0):
            raise DomainError("start point lies outside the box")
        f0 = float(f(x0))
        nevals += 1
        if not np.isfinite(f0):
            raise DomainError("objective is not finite at the start point")
        simplex = initial_simplex(x0, box, cfg.init_step)
        fvals = np.empty(D + 1)
        fvals[0] = f0
        for i in range(1, D + 1):
            fvals[i] = f(simplex[i])
        nevals += D
    else:
        simplex = np.array(simplex, dtype=np.float64)
        fvals = np.array(fvals, dtype=np.float64)

    alpha, gamma, rho, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    it = 0
    converged = False
    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]
    while it < max_iter:
        if (np.max(np.abs(fvals[1:] - fvals[0])) <= cfg.f_tol
                and np.max(np.abs(simplex[1:] - simplex[0])) <= cfg.x_tol):
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = box.clip(centroid + alpha * (centroid - worst))
        fr = f(xr)
        nevals += 1
        if fr < fvals[0]:
            xe = box.clip(centroid + gamma * (xr - centroid))
            fe = f(xe)
            nevals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = box.clip(centroid + rho * (xr - centroid))
                fc = f(xc)
                nevals += 1
                accept = fc <= fr
            else:
                xc = box.clip(centroid + rho * (worst - centroid))
                fc = f(xc)
                nevals += 1
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0]
                simplex[1:] = box.clip(best + sigma * (simplex[1:] - best))
                for i in range(1, D + 1):
                    fvals[i] = f(simplex[i])
                nevals += D
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]

    return NmResult(
        x=simplex[0].copy(),
        fun=float(fvals[0]),
        iterations=it,
        evaluations=nevals,
        converged=converged,
        simplex=simplex,
        fvals=fvals,
        f_start=f0,
    )


@dataclass
class MultiStartResult:
    x: np.ndarray
    fun: float
    starts: np.ndarray
    start_values: np.ndarray
    evaluations: int


def multi_start(
    f: Callable[[np.ndarray], float],
    box: Box,
    rng: np.random.Generator,
    n_starts: int = 30,
    probe_steps: int = 10,
    n_survivors: int = 5,
    cfg: NmConfig = NmConfig(),
) -> MultiStartResult:
    """Probe many uniform starts briefly, then run the best few to convergence.

    ``n_starts`` points are drawn uniformly in the box and each is given
    ``probe_steps`` Nelder-Mead iterations.  The ``n_survivors`` probes with
    the lowest objective continue from their simplex until convergence and
    the overall best point is returned.
    """
    starts = box.sample(rng, n_starts)
    probes = []
    start_values = np.empty(n_starts)
    evals = 0
    for i, x0 in enumerate(starts):
        res = nelder_mead(f, x0, box, cfg, max_iter=probe_steps)
        start_values[i] = res.f_start
        evals += res.evaluations
        probes.append(res)
    keep = np.argsort([p.fun for p in probes], kind="stable")[:n_survivors]
    best: Optional[NmResult] = None
    for i in keep:
        p = probes[i]
        res = nelder_mead(f, p.x, box, cfg, simplex=p.simplex, fvals=p.fvals)
        evals += res.evaluations
        if best is None or res.fun < best.fun:
            best = res
    return MultiStartResult(best.x, best.fun, starts, start_values, evals)
