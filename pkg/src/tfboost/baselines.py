"""Linear comparators for scalar-on-function regression.

* FLM1 expands the coefficient function in the orthonormal B-spline basis
  and penalizes its second derivative; the penalty weight is chosen on a
  validation set.
* FLM2 regresses the response on the leading functional principal component
  scores.

Both accept scalar covariates as unpenalized linear terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .boost import basis_from_dict, basis_to_dict, load_document
from .errors import DataError, DimensionError, DomainError, ModelFormatError
from .fda import (
    BasisSystem,
    FpcaResult,
    FunctionalSample,
    Grid,
    explained_components,
    fpca,
    interp_matrix,
    project_scores,
)

DEFAULT_LAMBDAS = np.logspace(-8, 2, 20)
FLM_FORMAT = "tfboost-flm"
FLM_VERSION = 1


@dataclass(eq=False)
class FlmModel:
    """``y ~ mu + <x, beta> + v @ eta``.

    ``coef`` holds the coefficients of the linear predictor on the model's
    feature map: basis scores for ``kind == "spline"`` and FPC scores for
    ``kind == "fpc"``.  ``beta`` is the coefficient function on ``beta_grid``.
    """

    kind: str
    intercept: float
    coef: np.ndarray
    eta: np.ndarray
    beta_grid: Grid
    beta: np.ndarray
    penalty: Optional[float] = None
    basis: Optional[BasisSystem] = None
    fpca: Optional[FpcaResult] = None
    rank_deficient: bool = False
    valid_mspe: Optional[np.ndarray] = None

    @property
    def n_scalars(self) -> int:
        return self.eta.size

    def _features(self, sample: FunctionalSample) -> np.ndarray:
        if self.kind == "spline":
            return project_scores(sample, self.basis)
        if not sample.grid.same_as(self.fpca.grid):
            L = interp_matrix(sample.grid.points, self.fpca.grid.points)
            return self.fpca.transform(sample.values @ L.T)
        return self.fpca.transform(sample.values)

    def predict(self, sample: FunctionalSample) -> np.ndarray:
        if sample.q != self.n_scalars:
            raise DimensionError(f"model expects {self.n_scalars} scalar covariates, got {sample.q}")
        out = self.intercept + self._features(sample) @ self.coef
        if self.n_scalars:
            out = out + sample.scalars @ self.eta
        return out


def _design(Z: np.ndarray, V: Optional[np.ndarray]) -> np.ndarray:
    cols = [np.ones((Z.shape[0], 1)), Z]
    if V is not None:
        cols.append(V)
    return np.hstack(cols)


def _lstsq(A: np.ndarray, b: np.ndarray):
    """Minimum-norm least squares; the flag reports a rank-deficient design."""
    theta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    return theta, bool(rank < A.shape[1])


def _penalty_root(Omega: np.ndarray) -> np.ndarray:
    """``R`` with ``R'R = Omega``; roundoff-level eigenvalues are set to zero.

    Zeroing them keeps the penalty's null space exact, so large penalties do
    not amplify quadrature noise.
    """
    ev, V = np.linalg.eigh(Omega)
    ev = np.where(ev > 1e-12 * max(ev.max(), 0.0), ev, 0.0)
    return np.sqrt(ev)[:, None] * V.T


def _need_response(sample: FunctionalSample, what: str) -> np.ndarray:
    if sample.response is None:
        raise DataError(f"{what} sample has no responses")
    if sample.n == 0:
        raise DataError(f"{what} sample is empty")
    return sample.response


def fit_flm1(
    train: FunctionalSample,
    valid: FunctionalSample,
    basis: BasisSystem,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDAS,
) -> FlmModel:
    """Penalized basis-expansion functional linear model.

    With design ``D = [1, Z, V]`` the coefficients minimize
    ``|y - D theta|^2 + n * lam * theta' Omega theta`` where ``Omega``
    penalizes the integrated squared second derivative of the coefficient
    function and is zero on the intercept and scalar columns.  Each problem is
    solved as an augmented least-squares system, which avoids squaring the
    condition number of ``D``.
    """
    y = _need_response(train, "training")
    yv = _need_response(valid, "validation")
    lambdas = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if lambdas.size == 0:
        raise DomainError("lambda grid is empty")
    if np.any(lambdas < 0):
        raise DomainError("penalty values must be non-negative")
    if train.q != valid.q:
        raise DimensionError("training and validation scalar covariates differ in width")

    D = _design(project_scores(train, basis), train.scalars)
    Dv = _design(project_scores(valid, basis), valid.scalars)
    d = basis.d
    Omega = np.zeros((D.shape[1], D.shape[1]))
    Omega[1 : d + 1, 1 : d + 1] = basis.penalty_matrix(2)
    R = _penalty_root(Omega)
    rhs = np.concatenate([y, np.zeros(R.shape[0])])
    n = train.n

    best = None
    errors = np.empty(lambdas.size)
    for i, lam in enumerate(lambdas):
        theta, deficient = _lstsq(np.vstack([D, np.sqrt(n * lam) * R]), rhs)
        r = Dv @ theta - yv
        errors[i] = r @ r / valid.n
        if best is None or errors[i] < errors[best[0]]:
            best = (i, theta, deficient)
    i, theta, deficient = best
    coef = theta[1 : d + 1]
    return FlmModel(
        kind="spline",
        intercept=float(theta[0]),
        coef=coef,
        eta=theta[d + 1 :],
        beta_grid=basis.grid,
        beta=coef @ basis.ortho,
        penalty=float(lambdas[i]),
        basis=basis,
        rank_deficient=deficient,
        valid_mspe=errors,
    )


def fit_flm2(
    train: FunctionalSample,
    basis_unused=None,
    fraction: float = 0.99,
    cap: int = 20,
    p: Optional[int] = None,
) -> FlmModel:
    """Least squares on the FPC scores that explain ``fraction`` of the variance."""
    y = _need_response(train, "training")
    if p is None:
        p = explained_components(train, fraction, cap)
    res = fpca(train, p)
    D = _design(res.scores, train.scalars)
    theta, deficient = _lstsq(D, y)
    coef = theta[1 : p + 1]
    return FlmModel(
        kind="fpc",
        intercept=float(theta[0]),
        coef=coef,
        eta=theta[p + 1 :],
        beta_grid=train.grid,
        beta=coef @ res.eigenfunctions,
        fpca=res,
        rank_deficient=deficient,
    )


def predict_flm(model: FlmModel, sample: FunctionalSample) -> np.ndarray:
    return model.predict(sample)


# ---------------------------------------------------------------------------
# persistence


def flm_to_dict(model: FlmModel) -> dict:
    doc = {
        "format": FLM_FORMAT,
        "version": FLM_VERSION,
        "kind": model.kind,
        "intercept": model.intercept,
        "coef": model.coef.tolist(),
        "eta": model.eta.tolist(),
        "penalty": model.penalty,
        "rank_deficient": model.rank_deficient,
    }
    if model.kind == "spline":
        doc["basis"] = basis_to_dict(model.basis)
    else:
        f = model.fpca
        doc["fpca"] = {
            "grid": f.grid.points.tolist(),
            "mean": f.mean.tolist(),
            "eigenfunctions": f.eigenfunctions.tolist(),
            "eigenvalues": f.eigenvalues.tolist(),
            "total_variance": f.total_variance,
        }
    return doc


def serialize_flm(model: FlmModel) -> str:
    return json.dumps(flm_to_dict(model), sort_keys=True, separators=(",", ":"))


def deserialize_flm(text: str) -> FlmModel:
    doc = load_document(text, FLM_FORMAT, FLM_VERSION)
    try:
        coef = np.asarray(doc["coef"], dtype=np.float64)
        common = dict(
            kind=doc["kind"],
            intercept=float(doc["intercept"]),
            coef=coef,
            eta=np.asarray(doc["eta"], dtype=np.float64),
            penalty=doc["penalty"],
            rank_deficient=bool(doc["rank_deficient"]),
        )
        if doc["kind"] == "spline":
            basis = basis_from_dict(doc["basis"])
            return FlmModel(beta_grid=basis.grid, beta=coef @ basis.ortho, basis=basis, **common)
        if doc["kind"] == "fpc":
            f = doc["fpca"]
            grid = Grid(f["grid"])
            phi = np.asarray(f["eigenfunctions"], dtype=np.float64)
            res = FpcaResult(grid, np.asarray(f["mean"], dtype=np.float64), phi,
                             np.asarray(f["eigenvalues"], dtype=np.float64),
                             np.zeros((0, phi.shape[0])), float(f["total_variance"]))
            return FlmModel(beta_grid=grid, beta=coef @ phi, fpca=res, **common)
        raise ModelFormatError(f"unknown linear model kind {doc['kind']!r}")
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"invalid linear model document: {exc!r}") from None
