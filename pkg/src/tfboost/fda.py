"""Discretized functional data: grids, quadrature, B-spline bases and FPCA."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionError, DomainError, RankError

# tolerance for matching grid endpoints to a basis interval
_EDGE_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points of a curve domain."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise DimensionError("grid needs a 1-d array of at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def uniform(cls, lo: float, hi: float, m: int) -> "Grid":
        return cls(np.linspace(lo, hi, m))

    @property
    def m(self) -> int:
        return self.points.size

    @property
    def interval(self) -> Tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.points)

    def same_as(self, other: "Grid") -> bool:
        return self.m == other.m and np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """``n`` curves on a shared grid, with optional scalar covariates and responses."""

    grid: Grid
    values: np.ndarray
    scalars: Optional[np.ndarray] = None
    response: Optional[np.ndarray] = None
    ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2 or vals.shape[1] != self.grid.m:
            raise DimensionError(
                f"values must be n x {self.grid.m}, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("curve values must be finite")
        n = vals.shape[0]
        object.__setattr__(self, "values", _frozen(vals))
        if self.scalars is not None:
            sc = np.asarray(self.scalars, dtype=np.float64)
            if sc.ndim == 1:
                sc = sc[:, None]
            if sc.shape[0] != n:
                raise DimensionError(f"scalars have {sc.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(sc)):
                raise DomainError("scalar covariates must be finite")
            object.__setattr__(self, "scalars", _frozen(sc))
        if self.response is not None:
            y = np.asarray(self.response, dtype=np.float64).ravel()
            if y.size != n:
                raise DimensionError(f"response has {y.size} entries, expected {n}")
            if not np.all(np.isfinite(y)):
                raise DomainError("responses must be finite")
            object.__setattr__(self, "response", _frozen(y))
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != n:
                raise DimensionError(f"{len(ids)} ids for {n} curves")
            object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return 0 if self.scalars is None else self.scalars.shape[1]

    def subset(self, index) -> "FunctionalSample":
        index = np.asarray(index)
        return FunctionalSample(
            self.grid,
            self.values[index],
            None if self.scalars is None else self.scalars[index],
            None if self.response is None else self.response[index],
            None if self.ids is None else tuple(np.asarray(self.ids, dtype=object)[index]),
        )

    def with_response(self, response) -> "FunctionalSample":
        return FunctionalSample(self.grid, self.values, self.scalars, response, self.ids)


# ---------------------------------------------------------------------------
# quadrature


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights, so that ``w @ f`` approximates the integral of f."""
    t = np.asarray(points, dtype=np.float64)
    h = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def trapezoid_inner(grid: Grid, f, g) -> float:
    """Trapezoidal approximation of the L2 inner product of ``f`` and ``g``."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != (grid.m,) or g.shape != (grid.m,):
        raise DimensionError(
            f"integrands must have length {grid.m}, got {f.shape} and {g.shape}"
        )
    return float(grid.weights() @ (f * g))


def segment_integral(points, values, lo: float, hi: float) -> np.ndarray:
    """Trapezoid integral of each row of ``values`` over ``[lo, hi]``.

    Endpoints that fall between grid points are added by linear interpolation.
    """
    t = np.asarray(points, dtype=np.float64)
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    lo, hi = max(lo, t[0]), min(hi, t[-1])
    if hi <= lo:
        return np.zeros(v.shape[0])
    inner = (t > lo) & (t < hi)
    knots = np.concatenate(([lo], t[inner], [hi]))
    ends = interp_matrix(t, np.array([lo, hi]))
    vals = np.hstack([v @ ends[:1].T, v[:, inner], v @ ends[1:].T])
    return vals @ trapezoid_weights(knots)


def interp_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Linear interpolation operator ``L`` with ``L @ f(src) = f(dst)``.

    Raises :class:`DomainError` when any destination point would need
    extrapolation.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if dst.min() < src[0] - _EDGE_TOL or dst.max() > src[-1] + _EDGE_TOL:
        raise DomainError(
            f"cannot extrapolate from [{src[0]}, {src[-1]}] to [{dst.min()}, {dst.max()}]"
        )
    x = np.clip(dst, src[0], src[-1])
    j = np.clip(np.searchsorted(src, x, side="right") - 1, 0, src.size - 2)
    frac = (x - src[j]) / (src[j + 1] - src[j])
    L = np.zeros((dst.size, src.size))
    rows = np.arange(dst.size)
    L[rows, j] = 1.0 - frac
    L[rows, j + 1] += frac
    return L


# ---------------------------------------------------------------------------
# B-splines


def clamped_knots(lo: float, hi: float, n_interior: int, degree: int) -> np.ndarray:
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def bspline_matrix(x, knots, degree: int, deriv: int = 0) -> np.ndarray:
    """Evaluate every B-spline of a clamped knot vector at ``x`` (Cox-de Boor).

    Returns an array of shape ``(len(knots) - degree - 1, len(x))``.  The
    ``deriv``-th derivative is obtained by differentiating the recursion.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(knots, dtype=np.float64)
    if deriv > degree:
        return np.zeros((t.size - degree - 1, x.size))
    if deriv > 0:
        lower = bspline_matrix(x, t, degree - 1, deriv - 1)
        nb = t.size - degree - 1
        out = np.zeros((nb, x.size))
        for i in range(nb):
            d1 = t[i + degree] - t[i]
            d2 = t[i + degree + 1] - t[i + 1]
            if d1 > 0:
                out[i] += degree / d1 * lower[i]
            if d2 > 0:
                out[i] -= degree / d2 * lower[i + 1]
        return out

    # degree-0 indicators, closing the last non-empty span on the right
    nspan = t.size - 1
    B = np.zeros((nspan, x.size))
    for i in range(nspan):
        if t[i + 1] > t[i]:
            B[i] = (x >= t[i]) & (x < t[i + 1])
    last = np.nonzero(t[1:] > t[:-1])[0][-1]
    B[last, x == t[-1]] = 1.0

    for k in range(1, degree + 1):
        nxt = np.zeros((nspan - k, x.size))
        for i in range(nspan - k):
            d1 = t[i + k] - t[i]
            d2 = t[i + k + 1] - t[i + 1]
            if d1 > 0:
                nxt[i] += (x - t[i]) / d1 * B[i]
            if d2 > 0:
                nxt[i] += (t[i + k + 1] - x) / d2 * B[i + 1]
        B = nxt
    return B


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """Orthonormalized B-spline functions evaluated on a quadrature grid.

    Attributes
    ----------
    grid : Grid
        Fine quadrature grid spanning the basis interval.
    raw : ndarray, shape (d, m_q)
        Raw B-spline evaluations.
    transform : ndarray, shape (d, d)
        Symmetric inverse square root of the raw Gram matrix.
    ortho : ndarray, shape (d, m_q)
        ``transform @ raw``; rows are orthonormal under trapezoid quadrature.
    """

    grid: Grid
    raw: np.ndarray
    transform: np.ndarray
    ortho: np.ndarray
    knots: np.ndarray
    degree: int
    n_interior: int
    _projectors: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.raw.shape[0]

    @property
    def interval(self) -> Tuple[float, float]:
        return self.grid.interval

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.degree + 1 : -(self.degree + 1)]

    def gram(self) -> np.ndarray:
        w = self.grid.weights()
        return (self.ortho * w) @ self.ortho.T

    def evaluate(self, x, deriv: int = 0) -> np.ndarray:
        """Orthonormal basis (or its derivative) at arbitrary points in the interval."""
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.interval
        if x.min() < lo - _EDGE_TOL or x.max() > hi + _EDGE_TOL:
            raise DomainError(f"points outside basis interval [{lo}, {hi}]")
        return self.transform @ bspline_matrix(np.clip(x, lo, hi), self.knots, self.degree, deriv)

    def penalty_matrix(self, deriv: int = 2) -> np.ndarray:
        """Quadrature of ``psi^(deriv) psi^(deriv)^T`` over the interval."""
        D = self.evaluate(self.grid.points, deriv)
        return (D * self.grid.weights()) @ D.T

    def projector(self, grid: Grid) -> np.ndarray:
        """Matrix ``P`` (m x d) such that ``curves @ P`` are the basis scores."""
        key = grid.points.tobytes()
        P = self._projectors.get(key)
        if P is None:
            _check_covers(grid, self.interval)
            wpsi = (self.ortho * self.grid.weights()).T  # m_q x d
            if grid.same_as(self.grid):
                P = wpsi
            else:
                P = interp_matrix(grid.points, self.grid.points).T @ wpsi
            P.setflags(write=False)
            self._projectors[key] = P
        return P


def _check_covers(grid: Grid, interval: Tuple[float, float]) -> None:
    lo, hi = interval
    glo, ghi = grid.interval
    scale = max(1.0, abs(hi - lo))
    if glo < lo - _EDGE_TOL * scale or ghi > hi + _EDGE_TOL * scale:
        raise DomainError(f"sample grid [{glo}, {ghi}] lies outside basis interval [{lo}, {hi}]")
    if glo > lo + _EDGE_TOL * scale or ghi < hi - _EDGE_TOL * scale:
        raise DomainError(
            f"sample grid [{glo}, {ghi}] does not span basis interval [{lo}, {hi}];"
            " extrapolation is not allowed"
        )


def build_basis(
    interval: Tuple[float, float],
    n_interior: int = 3,
    degree: int = 3,
    m_q: Optional[int] = None,
) -> BasisSystem:
    """Build an orthonormal cubic (by default) B-spline system on ``interval``.

    With 3 interior knots and degree 3 this gives the 7 functions used for
    every TFBoost and FLM1 fit.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise DomainError(f"degenerate interval [{lo}, {hi}]")
    if n_interior < 0 or degree < 1:
        raise DomainError("need n_interior >= 0 and degree >= 1")
    d = n_interior + degree + 1
    if m_q is None:
        m_q = max(401, 10 * d)
    if m_q < 10 * d:
        raise DomainError(f"quadrature grid of {m_q} points too coarse for {d} functions")

    grid = Grid.uniform(lo, hi, m_q)
    knots = clamped_knots(lo, hi, n_interior, degree)
    raw = bspline_matrix(grid.points, knots, degree)
    G = (raw * grid.weights()) @ raw.T
    evals, evecs = np.linalg.eigh(G)
    transform = (evecs / np.sqrt(evals)) @ evecs.T
    ortho = transform @ raw
    return BasisSystem(
        grid=grid,
        raw=_frozen(raw),
        transform=_frozen(transform),
        ortho=_frozen(ortho),
        knots=_frozen(knots),
        degree=int(degree),
        n_interior=int(n_interior),
    )


def basis_from_knots(knots, degree: int, n_interior: int, m_q: int, transform) -> BasisSystem:
    """Rebuild a basis from persisted parameters, reusing its stored transform."""
    knots = np.asarray(knots, dtype=np.float64)
    grid = Grid.uniform(knots[0], knots[-1], m_q)
    raw = bspline_matrix(grid.points, knots, degree)
    transform = np.asarray(transform, dtype=np.float64)
    return BasisSystem(
        grid=grid,
        raw=_frozen(raw),
        transform=_frozen(transform),
        ortho=_frozen(transform @ raw),
        knots=_frozen(knots),
        degree=int(degree),
        n_interior=int(n_interior),
    )


def project_scores(sample: FunctionalSample, basis: BasisSystem) -> np.ndarray:
    """Inner products of each curve with each orthonormal basis function (n x d)."""
    return sample.values @ basis.projector(sample.grid)


# ---------------------------------------------------------------------------
# FPCA


@dataclass(frozen=True, eq=False)
class FpcaResult:
    grid: Grid
    mean: np.ndarray
    eigenfunctions: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    total_variance: float

    @property
    def p(self) -> int:
        return self.eigenfunctions.shape[0]

    def transform(self, values) -> np.ndarray:
        """Scores of new curves (on the same grid) against the fitted components."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if values.shape[1] != self.grid.m:
            raise DimensionError(f"curves must have {self.grid.m} columns")
        w = self.grid.weights()
        return ((values - self.mean) * w) @ self.eigenfunctions.T

    def reconstruct(self, scores) -> np.ndarray:
        return self.mean + np.asarray(scores) @ self.eigenfunctions


def canonical_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so that its largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64)
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fpca(sample: FunctionalSample, p: int) -> FpcaResult:
    """Functional PCA of the sample curves on their observation grid.

    The covariance operator is discretized with trapezoid weights ``w``:
    the symmetric matrix ``W^1/2 C W^1/2`` is eigen-decomposed and the
    eigenvectors are mapped back with ``W^-1/2`` so that each eigenfunction
    has unit L2 norm.
    """
    n, m = sample.values.shape
    if p < 1:
        raise RankError("need at least one component")
    if p >= min(n, m):
        raise RankError(f"p={p} must be below min(n, m)={min(n, m)}")
    X = sample.values
    mu = X.mean(axis=0)
    Xc = X - mu
    w = sample.grid.weights()
    sw = np.sqrt(w)
    C = (Xc.T @ Xc) / (n - 1)
    M = sw[:, None] * C * sw[None, :]
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    total = float(np.clip(evals, 0.0, None).sum())
    phi = canonical_sign((evecs[:, :p] / sw[:, None]).T)
    lam = np.clip(evals[:p], 0.0, None)
    scores = (Xc * w) @ phi.T
    return FpcaResult(
        grid=sample.grid,
        mean=_frozen(mu),
        eigenfunctions=_frozen(phi),
        eigenvalues=_frozen(lam),
        scores=_frozen(scores),
        total_variance=total,
    )


def explained_components(sample: FunctionalSample, fraction: float = 0.99, cap: int = 20) -> int:
    """Smallest number of components whose eigenvalues explain ``fraction`` of variance."""
    n, m = sample.values.shape
    pmax = min(cap, min(n, m) - 1)
    res = fpca(sample, pmax)
    if res.total_variance <= 0:
        return 1
    frac = np.cumsum(res.eigenvalues) / res.total_variance
    hit = np.nonzero(frac >= fraction - 1e-12)[0]
    return int(hit[0] + 1) if hit.size else pmax
