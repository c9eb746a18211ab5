"""Simulated scalar-on-function regression benchmarks.

Two predictor models generate curves on a 100-point grid:

* ``M1``: ``x(t) = a + b t^2 + c exp(t) + sin(d t)`` on ``[-1, 1]``;
* ``M2``: a four-term Karhunen-Loeve expansion around
  ``mu(t) = 2 sin(pi t) exp(1 - t)`` on ``[0, 1]`` whose components are the
  leading eigenfunctions of a Matern covariance.

Five regression functions ``r1``..``r5`` map curves to responses, and
Gaussian noise is added at a fixed signal-to-noise ratio.

Randomness
----------
All draws derive from one master seed through
``SeedSequence(master, spawn_key=key)`` with

* ``(0, rep, stream)`` for replication ``rep`` (curves, noise, split),
* ``(0, rep, LEARNER, method, depth)`` for a method's fitting generator,
* ``(1, predictor, regression, stream)`` for per-setting quantities that
  stay fixed across replications (noise calibration, reference FPCA).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import fit_flm1, fit_flm2
from .boost import BoostConfig, fit_depth_grid, mspe
from .cart import TreeConfig
from .errors import DataError, DomainError, NumericalError, TFBoostError
from .fda import (
    FpcaResult,
    FunctionalSample,
    Grid,
    build_basis,
    canonical_sign,
    fpca,
    segment_integral,
)

PREDICTORS = ("M1", "M2")
REGRESSIONS = ("r1", "r2", "r3", "r4", "r5")
INTERVALS = {"M1": (-1.0, 1.0), "M2": (0.0, 1.0)}
M2_LAMBDA = (0.8, 0.3, 0.2, 0.1)

GRID_SIZE = 100
CALIBRATION_SIZE = 10_000
REFERENCE_SIZE = 3000

# stream identifiers
CURVES, NOISE, SPLIT, LEARNER = 0, 1, 2, 3
CALIBRATION_CURVES, CALIBRATION_NOISE, REFERENCE = 0, 1, 2


def stream(master: int, *key: int) -> np.random.Generator:
    """Independent generator for the named stream ``key`` under ``master``."""
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(key)))


# ---------------------------------------------------------------------------
# Bessel function and Matern covariance

SERIES_LIMIT = 2.0
_QUAD_STEP = 0.05
_QUAD_END = 12.0


def _bessel_i_series(nu: float, half: np.ndarray, terms: int = 40) -> np.ndarray:
    """``I_nu(2 * half)`` from its power series (``nu`` may be negative, non-integer)."""
    q = half * half
    term = half**nu / math.gamma(nu + 1.0)
    total = term.copy()
    for k in range(1, terms):
        term = term * q / (k * (k + nu))
        total += term
    return total


def bessel_k(nu: float, u) -> np.ndarray:
    """Modified Bessel function of the second kind ``K_nu(u)`` for non-integer ``nu``.

    For ``u <= 2`` the reflection formula
    ``K_nu = pi / (2 sin(nu pi)) * (I_-nu - I_nu)`` is summed from the power
    series.  Above the crossover the integral
    ``K_nu(u) = int_0^inf exp(-u cosh s) cosh(nu s) ds`` is evaluated with
    the trapezoid rule, which converges geometrically for this integrand.
    """
    nu = abs(float(nu))
    if abs(nu - round(nu)) < 1e-12:
        raise DomainError("bessel_k supports non-integer orders only")
    u = np.asarray(u, dtype=np.float64)
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise DomainError("bessel_k needs finite u > 0")
    flat = u.ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_LIMIT
    if small.any():
        half = flat[small] / 2
        diff = _bessel_i_series(-nu, half) - _bessel_i_series(nu, half)
        out[small] = math.pi / (2 * math.sin(nu * math.pi)) * diff
    if (~small).any():
        big = flat[~small][:, None]
        s = np.arange(0.0, _QUAD_END, _QUAD_STEP)
        w = np.full(s.size, _QUAD_STEP)
        w[0] = _QUAD_STEP / 2
        # factor out exp(-u) so the integrand starts at 1
        integrand = np.exp(-big * (np.cosh(s) - 1.0)) * np.cosh(nu * s)
        out[~small] = np.exp(-flat[~small]) * (integrand @ w)
    return out.reshape(u.shape)


@dataclass(frozen=True)
class MaternSpec:
    rho: float = 3.0
    sigma: float = 1.0
    nu: float = 1.0 / 3.0
    n_eigen: int = 4

    def __post_init__(self):
        if min(self.rho, self.sigma, self.nu) <= 0 or self.n_eigen < 1:
            raise DomainError("Matern parameters must be positive")


def matern_cov(spec: MaternSpec, s, t) -> np.ndarray:
    """Matern covariance ``gamma(s, t)`` on the outer grid of ``s`` and ``t``."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    u = math.sqrt(2 * spec.nu) * np.abs(s[:, None] - t[None, :]) / spec.rho
    out = np.full(u.shape, spec.sigma**2)
    pos = u > 0
    if pos.any():
        up = u[pos]
        c = spec.sigma**2 * 2 ** (1 - spec.nu) / math.gamma(spec.nu)
        out[pos] = c * up**spec.nu * bessel_k(spec.nu, up)
    return out


@dataclass(frozen=True, eq=False)
class MaternEigen:
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (n_eigen, m) on the target grid
    grid: Grid


def matern_eigen(spec: MaternSpec, grid: Grid, n_solve: int = 501) -> MaternEigen:
    """Leading eigenpairs of the Matern covariance operator by the Nystrom method.

    The operator is discretized with trapezoid weights on ``n_solve`` uniform
    points spanning ``grid``; eigenfunctions are carried to ``grid`` through
    the Nystrom extension, symmetrically orthonormalized under the
    quadrature of ``grid`` and given a canonical sign.
    """
    if n_solve < 200:
        raise DomainError("the Nystrom solve needs at least 200 points")
    lo, hi = grid.interval
    fine = Grid.uniform(lo, hi, n_solve)
    w = fine.weights()
    sw = np.sqrt(w)
    Kf = matern_cov(spec, fine.points, fine.points)
    M = sw[:, None] * Kf * sw[None, :]
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    scale = max(1.0, float(np.abs(evals).max()))
    if evals.min() < -1e-8 * scale:
        raise NumericalError(f"Matern kernel matrix is not PSD (min eigenvalue {evals.min():.3e})")
    k = spec.n_eigen
    evals, evecs = evals[::-1][:k], evecs[:, ::-1][:, :k]
    if np.any(evals <= 0):
        raise NumericalError("Matern operator has fewer positive eigenvalues than requested")
    phi_fine = evecs / sw[:, None]  # unit norm under fine-grid quadrature
    Kx = matern_cov(spec, grid.points, fine.points)
    phi = ((Kx * w) @ phi_fine / evals).T
    # symmetric orthonormalization under the target grid's own quadrature
    G = (phi * grid.weights()) @ phi.T
    gv, gq = np.linalg.eigh(G)
    phi = canonical_sign(((gq / np.sqrt(gv)) @ gq.T) @ phi)
    phi.setflags(write=False)
    return MaternEigen(evals.copy(), phi, grid)


@lru_cache(maxsize=8)
def _cached_eigen(spec: MaternSpec, lo: float, hi: float, m: int) -> MaternEigen:
    return matern_eigen(spec, Grid.uniform(lo, hi, m))


def default_grid(predictor: str, m: int = GRID_SIZE) -> Grid:
    lo, hi = INTERVALS[_check_predictor(predictor)]
    return Grid.uniform(lo, hi, m)


def _check_predictor(name: str) -> str:
    if name not in PREDICTORS:
        raise DomainError(f"unknown predictor model {name!r}; choose from {', '.join(PREDICTORS)}")
    return name


def _uniform_eigen(grid: Grid, spec: MaternSpec) -> MaternEigen:
    lo, hi = grid.interval
    uni = Grid.uniform(lo, hi, grid.m)
    if np.allclose(uni.points, grid.points, rtol=0, atol=1e-14):
        return _cached_eigen(spec, lo, hi, grid.m)
    return matern_eigen(spec, grid)


# ---------------------------------------------------------------------------
# predictor models


def m1_curves(grid: Grid, a, b, c, d) -> np.ndarray:
    t = grid.points
    a, b, c, d = (np.asarray(v, dtype=np.float64)[:, None] for v in (a, b, c, d))
    return a + b * t**2 + c * np.exp(t) + np.sin(d * t)


def gen_m1(n: int, grid: Grid, rng: np.random.Generator) -> FunctionalSample:
    if n < 1:
        raise DomainError("n must be >= 1")
    a = rng.uniform(0, 1, n)
    b = rng.uniform(0, 1, n)
    c = rng.uniform(-1, 1, n)
    d = rng.uniform(-2 * math.pi, 2 * math.pi, n)
    return FunctionalSample(grid, m1_curves(grid, a, b, c, d))


def m2_mean(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return 2 * np.sin(t * math.pi) * np.exp(1 - t)


def m2_curves(grid: Grid, xi, phi, lam=M2_LAMBDA) -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    return m2_mean(grid.points) + (xi * np.sqrt(np.asarray(lam))) @ phi


def gen_m2(n: int, grid: Grid, rng: np.random.Generator, spec: MaternSpec = MaternSpec(),
           lam: Sequence[float] = M2_LAMBDA) -> FunctionalSample:
    if n < 1:
        raise DomainError("n must be >= 1")
    if len(lam) != spec.n_eigen:
        raise DomainError(f"{len(lam)} eigenvalues for {spec.n_eigen} eigenfunctions")
    phi = _uniform_eigen(grid, spec).eigenfunctions
    xi = rng.standard_normal((n, spec.n_eigen))
    return FunctionalSample(grid, m2_curves(grid, xi, phi, lam))


def generate(predictor: str, n: int, grid: Grid, rng: np.random.Generator) -> FunctionalSample:
    if _check_predictor(predictor) == "M1":
        return gen_m1(n, grid, rng)
    return gen_m2(n, grid, rng)


# ---------------------------------------------------------------------------
# regression functions


def _integral(grid: Grid, values) -> np.ndarray:
    return np.atleast_2d(values) @ grid.weights()


def _x_log_abs(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    out = np.zeros_like(x)
    nz = ax > 0
    out[nz] = x[nz] * np.log(ax[nz])
    return out


def _logistic(u):
    return 1.0 / (1.0 + np.exp(-u))


def reference_fpca(predictor: str, grid: Grid, master: int, size: int = REFERENCE_SIZE) -> FpcaResult:
    """Two-component FPCA of an independent large sample, fixed per seed."""
    k = PREDICTORS.index(_check_predictor(predictor))
    sample = generate(predictor, size, grid, stream(master, 1, k, 0, REFERENCE))
    return fpca(sample, 2)


def r1_center(predictor: str, grid: Grid, fpca_ref: Optional[FpcaResult]) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and weight ``phi_1 + phi_2`` used by ``r1``."""
    if predictor == "M2":
        phi = _uniform_eigen(grid, MaternSpec()).eigenfunctions
        return m2_mean(grid.points), phi[0] + phi[1]
    if fpca_ref is None:
        raise DataError("r1 under M1 needs a reference FPCA")
    if not fpca_ref.grid.same_as(grid):
        raise DomainError("reference FPCA grid differs from the sample grid")
    return fpca_ref.mean, fpca_ref.eigenfunctions[0] + fpca_ref.eigenfunctions[1]


def r4_halves(predictor: str) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    return ((-1.0, 0.0), (0.0, 1.0)) if predictor == "M1" else ((0.0, 0.5), (0.5, 1.0))


def apply_regression(
    sample: FunctionalSample,
    which: str,
    predictor: str,
    fpca_ref: Optional[FpcaResult] = None,
) -> np.ndarray:
    """Noise-free responses ``r(x_i)`` evaluated by trapezoid quadrature."""
    _check_predictor(predictor)
    g, X = sample.grid, sample.values
    t = g.points
    if which == "r1":
        mu, wt = r1_center(predictor, g, fpca_ref)
        return np.cbrt(_integral(g, (X - mu) * wt))
    if which == "r2":
        return 5 * np.exp(-0.5 * np.abs(_integral(g, _x_log_abs(X))))
    if which == "r3":
        return 5 * _logistic(2 * _integral(g, X**2 * np.sin(2 * math.pi * t)))
    if which == "r4":
        (a1, b1), (a2, b2) = r4_halves(predictor)
        first = segment_integral(t, np.cos(2 * math.pi * t**2) * X, a1, b1)
        second = segment_integral(t, np.sin(X), a2, b2)
        return 5 * (np.sqrt(np.abs(first)) + np.sqrt(np.abs(second)))
    if which == "r5":
        wt = np.sin(1.5 * math.pi * t) + np.sin(0.5 * math.pi * t)
        return _integral(g, X * wt)
    raise DomainError(f"unknown regression function {which!r}; choose from {', '.join(REGRESSIONS)}")


def calibrate_noise(signal, snr: float) -> float:
    """Noise scale ``rho`` with ``Var(signal) / rho^2 = snr``."""
    if not snr > 0:
        raise DomainError("snr must be positive")
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < 2:
        raise DomainError("need at least two signal values")
    var = float(np.var(signal, ddof=1))
    if not var > 0:
        raise DomainError("signal has zero variance; noise scale is undefined")
    return math.sqrt(var / snr)


# ---------------------------------------------------------------------------
# settings and data


@dataclass(frozen=True)
class SimSetting:
    predictor: str = "M2"
    regression: str = "r1"
    snr: float = 20.0
    n_train: int = 400
    n_valid: int = 200
    n_test: int = 1000
    grid_size: int = GRID_SIZE
    seed: int = 0

    def __post_init__(self):
        _check_predictor(self.predictor)
        if self.regression not in REGRESSIONS:
            raise DomainError(f"unknown regression {self.regression!r}")
        if not self.snr > 0:
            raise DomainError("snr must be positive")
        if min(self.n_train, self.n_valid, self.n_test) < 1 or self.grid_size < 2:
            raise DomainError("sample sizes and grid size must be positive")

    @property
    def label(self) -> str:
        return f"{self.regression},{self.predictor},snr{self.snr:g}"

    @property
    def grid(self) -> Grid:
        return default_grid(self.predictor, self.grid_size)

    @property
    def key(self) -> Tuple[int, int]:
        return PREDICTORS.index(self.predictor), REGRESSIONS.index(self.regression)

    @classmethod
    def parse(cls, text: str, **kw) -> "SimSetting":
        """Parse labels such as ``r1,M2,snr20``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        vals = {}
        for p in parts:
            low = p.lower()
            if low.startswith("snr"):
                try:
                    vals["snr"] = float(low[3:])
                except ValueError:
                    raise DomainError(f"bad snr in setting {text!r}") from None
            elif p.upper() in PREDICTORS:
                vals["predictor"] = p.upper()
            elif low in REGRESSIONS:
                vals["regression"] = low
            else:
                raise DomainError(f"unrecognized token {p!r} in setting {text!r}")
        if set(vals) != {"snr", "predictor", "regression"}:
            raise DomainError(f"setting {text!r} needs a regression, a predictor and snr<value>")
        return cls(**vals, **kw)


@dataclass(frozen=True, eq=False)
class SettingContext:
    """Quantities fixed across the replications of one setting."""

    grid: Grid
    fpca_ref: Optional[FpcaResult]
    rho: float


def setting_context(setting: SimSetting) -> SettingContext:
    grid = setting.grid
    kp, kr = setting.key
    ref = None
    if setting.regression == "r1" and setting.predictor == "M1":
        ref = reference_fpca(setting.predictor, grid, setting.seed)
    calib = generate(setting.predictor, CALIBRATION_SIZE, grid,
                     stream(setting.seed, 1, kp, kr, CALIBRATION_CURVES))
    signal = apply_regression(calib, setting.regression, setting.predictor, ref)
    return SettingContext(grid, ref, calibrate_noise(signal, setting.snr))


def draw_responses(sample: FunctionalSample, setting: SimSetting, ctx: SettingContext,
                   rng: np.random.Generator) -> FunctionalSample:
    signal = apply_regression(sample, setting.regression, setting.predictor, ctx.fpca_ref)
    return sample.with_response(signal + ctx.rho * rng.standard_normal(sample.n))


def replication_data(setting: SimSetting, rep: int, ctx: Optional[SettingContext] = None):
    """Training, validation and test sets of replication ``rep``."""
    ctx = ctx or setting_context(setting)
    N = setting.n_train + setting.n_valid + setting.n_test
    curves = generate(setting.predictor, N, ctx.grid, stream(setting.seed, 0, rep, CURVES))
    full = draw_responses(curves, setting, ctx, stream(setting.seed, 0, rep, NOISE))
    perm = stream(setting.seed, 0, rep, SPLIT).permutation(N)
    a, b = setting.n_train, setting.n_train + setting.n_valid
    return full.subset(perm[:a]), full.subset(perm[a:b]), full.subset(perm[b:])


# ---------------------------------------------------------------------------
# methods


@dataclass(frozen=True)
class MethodOptions:
    gamma: float = 0.05
    t_max: int = 1000
    pool_size: int = 200
    depths: Tuple[int, ...] = (1, 2, 3, 4)
    min_node: int = 5
    loss: str = "squared"


METHODS = ("tfboost-b", "tfboost-a1", "tfboost-a2", "tfboost-a3", "flm1", "flm2", "mean")
METHOD_LABELS = {
    "tfboost-b": "TFBoost(B)",
    "tfboost-a1": "TFBoost(A.1)",
    "tfboost-a2": "TFBoost(A.2)",
    "tfboost-a3": "TFBoost(A.3)",
    "flm1": "FLM1",
    "flm2": "FLM2",
    "mean": "Mean",
}


def check_methods(methods: Sequence[str]) -> List[str]:
    methods = [m.strip().lower() for m in methods if m.strip()]
    if not methods:
        raise DomainError("no methods given")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise DomainError(f"unknown method(s) {', '.join(bad)}; valid names: {', '.join(METHODS)}")
    return methods


class _MeanModel:
    def __init__(self, value: float):
        self.value = value

    def predict(self, sample: FunctionalSample) -> np.ndarray:
        return np.full(sample.n, self.value)


def fit_method(method: str, train, valid, opts: MethodOptions, seed_for: Callable[[int], int]):
    """Fit ``method`` with its validation-based tuning and return the model."""
    lo, hi = train.grid.interval
    if method.startswith("tfboost"):
        basis = build_basis((lo, hi))
        learner = "B" if method == "tfboost-b" else "A"
        K = 1 if learner == "B" else int(method[-1])
        cfg = BoostConfig(learner=learner, K=K, P=opts.pool_size, gamma=opts.gamma,
                          t_max=opts.t_max, tree=TreeConfig(1, opts.min_node), loss=opts.loss)
        model, _ = fit_depth_grid(train, valid, basis, cfg, opts.depths,
                                  seeds=[seed_for(k) for k in opts.depths])
        return model
    if method == "flm1":
        return fit_flm1(train, valid, build_basis((lo, hi)))
    if method == "flm2":
        return fit_flm2(train)
    if method == "mean":
        return _MeanModel(float(train.response.mean()))
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# harness


@dataclass(frozen=True)
class Record:
    method: str
    setting: str
    replication: int
    mspe: Optional[float]
    status: str = "ok"


@dataclass
class SimResults:
    records: List[Record] = field(default_factory=list)

    def by_method(self) -> Dict[Tuple[str, str], List[Record]]:
        groups: Dict[Tuple[str, str], List[Record]] = {}
        for r in self.records:
            groups.setdefault((r.setting, r.method), []).append(r)
        return groups

    def summary(self) -> List[dict]:
        rows = []
        for (setting, method), recs in self.by_method().items():
            vals = np.array([r.mspe for r in recs if r.mspe is not None])
            rows.append({
                "setting": setting,
                "method": method,
                "n_ok": int(vals.size),
                "n_failed": len(recs) - int(vals.size),
                "mean": float(vals.mean()) if vals.size else None,
                "sd": float(vals.std(ddof=1)) if vals.size > 1 else None,
            })
        return rows

    def mean(self, method: str, setting: Optional[str] = None) -> float:
        for row in self.summary():
            if row["method"] == method and (setting is None or row["setting"] == setting):
                return row["mean"]
        raise KeyError(method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "setting", "replication", "mspe", "status"])
        for r in self.records:
            w.writerow([r.method, r.setting, r.replication,
                        "" if r.mspe is None else repr(r.mspe), r.status])
        return buf.getvalue()

    def summary_table(self, digits: int = 3) -> str:
        """Plain-text table of ``mean (sd)`` per method."""
        lines = []
        for row in self.summary():
            lines.append((row["setting"], METHOD_LABELS.get(row["method"], row["method"]),
                          format_mean_sd(row["mean"], row["sd"], digits), row["n_failed"]))
        wm = max([len(m) for _, m, _, _ in lines] + [6])
        ws = max([len(s) for s, _, _, _ in lines] + [7])
        out = [f"{'setting':<{ws}}  {'method':<{wm}}  mspe"]
        for s, m, cell, failed in lines:
            note = f"  [{failed} failed]" if failed else ""
            out.append(f"{s:<{ws}}  {m:<{wm}}  {cell}{note}")
        return "\n".join(out) + "\n"


def format_mean_sd(mean: Optional[float], sd: Optional[float], digits: int = 3) -> str:
    if mean is None:
        return "NA"
    if sd is None:
        return f"{mean:.{digits}f} (NA)"
    return f"{mean:.{digits}f} ({sd:.{digits}f})"


def run_replication(setting: SimSetting, methods: Sequence[str], rep: int,
                    opts: MethodOptions = MethodOptions(),
                    ctx: Optional[SettingContext] = None) -> List[Record]:
    ctx = ctx or setting_context(setting)
    train, valid, test = replication_data(setting, rep, ctx)
    out = []
    for method in methods:
        mid = METHODS.index(method)

        def seed_for(depth, _mid=mid):
            ss = np.random.SeedSequence(setting.seed, spawn_key=(0, rep, LEARNER, _mid, depth))
            return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))

        try:
            model = fit_method(method, train, valid, opts, seed_for)
            err = mspe(model, test)
            if not math.isfinite(err):
                raise NumericalError("non-finite test error")
            out.append(Record(method, setting.label, rep, err))
        except (TFBoostError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(Record(method, setting.label, rep, None, f"failed: {type(exc).__name__}: {exc}"))
    return out


def _run_one(args):
    return run_replication(*args)


def run_setting(setting: SimSetting, methods: Sequence[str], replications: int,
                opts: MethodOptions = MethodOptions(), jobs: int = 1) -> SimResults:
    """Run ``replications`` independent datasets of ``setting`` through every method."""
    methods = check_methods(methods)
    if replications < 1:
        raise DomainError("replications must be >= 1")
    ctx = setting_context(setting)
    tasks = [(setting, methods, rep, opts, ctx) for rep in range(replications)]
    if jobs > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, replications)) as pool:
            chunks = list(pool.map(_run_one, tasks))
    else:
        chunks = [_run_one(t) for t in tasks]
    return SimResults([r for chunk in chunks for r in chunk])


def empirical_snr(setting: SimSetting, size: int = CALIBRATION_SIZE, rep: int = 0) -> float:
    """SNR of a freshly generated dataset, measured as Var(r(x)) / Var(y - r(x))."""
    ctx = setting_context(setting)
    curves = generate(setting.predictor, size, ctx.grid, stream(setting.seed, 0, rep, CURVES))
    signal = apply_regression(curves, setting.regression, setting.predictor, ctx.fpca_ref)
    noise = ctx.rho * stream(setting.seed, 0, rep, NOISE).standard_normal(size)
    return float(np.var(signal, ddof=1) / np.var(noise, ddof=1))
