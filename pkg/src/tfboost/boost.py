"""The TFBoost gradient boosting driver.

Each iteration fits a functional multi-index tree to the negative gradient
of the loss at the current fit, finds a step size by line search, and adds
the shrunken step.  The iteration with the lowest validation loss is kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from .cart import TreeConfig
from .errors import DataError, DimensionError, DomainError, ModelFormatError, UnsupportedVersionError
from .fda import BasisSystem, FunctionalSample, basis_from_knots, project_scores
from .learners import (
    MultiIndexTree,
    MultiStartConfig,
    fit_type_a,
    fit_type_b,
    predict_mit,
)
from .optimizer import NmConfig

MODEL_FORMAT = "tfboost-model"
MODEL_VERSION = 1

LINE_SEARCH_MAX = 100.0
GOLDEN_TOL = 1e-6


# ---------------------------------------------------------------------------
# losses


class SquaredLoss:
    """``L(y, f) = (y - f)^2``.

    The negative gradient is reported as the residual ``y - f``; the factor 2
    is absorbed by the line search.
    """

    name = "squared"

    def value(self, y, f):
        r = np.asarray(y) - np.asarray(f)
        return r * r

    def neg_gradient(self, y, f):
        return np.asarray(y) - np.asarray(f)

    def initial(self, y) -> float:
        return float(np.mean(y))

    def spec(self) -> str:
        return self.name


class HuberLoss:
    """Huber loss with threshold ``delta``: quadratic within, linear outside."""

    name = "huber"

    def __init__(self, delta: float = 1.345):
        if not delta > 0:
            raise DomainError("huber delta must be positive")
        self.delta = float(delta)

    def value(self, y, f):
        r = np.abs(np.asarray(y) - np.asarray(f))
        dl = self.delta
        return np.where(r <= dl, 0.5 * r * r, dl * (r - 0.5 * dl))

    def neg_gradient(self, y, f):
        return np.clip(np.asarray(y) - np.asarray(f), -self.delta, self.delta)

    def initial(self, y) -> float:
        y = np.asarray(y)
        return golden_section(lambda a: float(self.value(y, a).sum()), float(y.min()), float(y.max()))

    def spec(self) -> str:
        return f"huber:{self.delta!r}"


Loss = Union[SquaredLoss, HuberLoss]


def parse_loss(text: str) -> Loss:
    text = text.strip().lower()
    if text == "squared":
        return SquaredLoss()
    if text.startswith("huber"):
        _, _, arg = text.partition(":")
        try:
            return HuberLoss(float(arg)) if arg else HuberLoss()
        except ValueError:
            raise DataError(f"bad huber threshold in {text!r}") from None
    raise DataError(f"unknown loss {text!r}; use 'squared' or 'huber:<delta>'")


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]`` to absolute tolerance ``tol``."""
    if hi <= lo:
        return lo
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    # compare with the bracket ends so a boundary optimum is not lost
    cands = [(f(lo), lo), (f(hi), hi), (f(0.5 * (a + b)), 0.5 * (a + b))]
    return min(cands)[1]


# ---------------------------------------------------------------------------
# configuration and model


@dataclass(frozen=True)
class BoostConfig:
    learner: str = "B"  # "A" or "B"
    K: int = 1  # indices per Type A tree
    P: int = 200  # pool size per Type B tree
    gamma: float = 0.05
    t_max: int = 1000
    tree: TreeConfig = TreeConfig(max_depth=1)
    loss: str = "squared"
    seed: int = 0
    multistart: MultiStartConfig = MultiStartConfig()

    def __post_init__(self):
        if self.learner not in ("A", "B"):
            raise DomainError(f"learner must be 'A' or 'B', got {self.learner!r}")
        if not 0 < self.gamma < 1:
            raise DomainError("shrinkage gamma must lie in (0, 1)")
        if self.t_max < 1:
            raise DomainError("t_max must be >= 1")
        if self.K < 1 or self.P < 1:
            raise DomainError("K and P must be >= 1")
        parse_loss(self.loss)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostConfig":
        doc = dict(doc)
        doc["tree"] = TreeConfig(**doc["tree"])
        ms = dict(doc["multistart"])
        ms["nm"] = NmConfig(**ms["nm"])
        doc["multistart"] = MultiStartConfig(**ms)
        return cls(**doc)

    def label(self) -> str:
        return f"TFBoost(A.{self.K})" if self.learner == "A" else "TFBoost(B)"


@dataclass(eq=False)
class BoostModel:
    f0: float
    steps: List[Tuple[MultiIndexTree, float]]
    t_stop: int
    basis: BasisSystem
    config: BoostConfig
    train_loss: np.ndarray
    valid_loss: np.ndarray
    n_scalars: int = 0

    @property
    def loss(self) -> Loss:
        return parse_loss(self.config.loss)

    @property
    def gamma(self) -> float:
        return self.config.gamma


def _scores(sample: FunctionalSample, basis: BasisSystem) -> np.ndarray:
    return project_scores(sample, basis)


def _deterministic_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def fit_boost(
    train: FunctionalSample,
    valid: FunctionalSample,
    basis: BasisSystem,
    cfg: BoostConfig,
    rng: Optional[np.random.Generator] = None,
) -> BoostModel:
    """Run ``cfg.t_max`` boosting iterations and keep the best validation iterate."""
    if train.response is None or valid.response is None:
        raise DataError("training and validation samples need responses")
    if valid.n == 0:
        raise DataError("validation set is empty")
    if train.q != valid.q:
        raise DimensionError("training and validation scalar covariates differ in width")
    loss = parse_loss(cfg.loss)
    rng = rng if rng is not None else _deterministic_rng(cfg.seed)

    S_tr, S_va = _scores(train, basis), _scores(valid, basis)
    V_tr, V_va = train.scalars, valid.scalars
    y_tr, y_va = train.response, valid.response

    f0 = loss.initial(y_tr)
    F_tr = np.full(train.n, f0)
    F_va = np.full(valid.n, f0)
    train_trace = np.empty(cfg.t_max)
    valid_trace = np.empty(cfg.t_max)
    steps: List[Tuple[MultiIndexTree, float]] = []

    for t in range(cfg.t_max):
        u = loss.neg_gradient(y_tr, F_tr)
        if cfg.learner == "A":
            model = fit_type_a(S_tr, V_tr, u, cfg.K, cfg.tree, rng, cfg.multistart)
        else:
            model = fit_type_b(S_tr, V_tr, u, cfg.P, cfg.tree, rng).compact()
        h_tr = predict_mit(model, S_tr, V_tr)
        alpha = line_search(loss, y_tr, F_tr, h_tr)
        F_tr = F_tr + cfg.gamma * alpha * h_tr
        F_va = F_va + cfg.gamma * alpha * predict_mit(model, S_va, V_va)
        train_trace[t] = loss.value(y_tr, F_tr).mean()
        valid_trace[t] = loss.value(y_va, F_va).mean()
        steps.append((model, alpha))

    t_stop = int(np.argmin(valid_trace)) + 1
    return BoostModel(f0, steps, t_stop, basis, cfg, train_trace, valid_trace, train.q)


def fit_depth_grid(
    train: FunctionalSample,
    valid: FunctionalSample,
    basis: BasisSystem,
    cfg: BoostConfig,
    depths=(1, 2, 3, 4),
    seeds=None,
) -> Tuple[BoostModel, dict]:
    """Fit one model per maximum tree depth and keep the best on validation.

    Every depth gets its own generator; ``seeds`` (one per depth) overrides
    the default of ``cfg.seed``.  Returns the chosen model and the early-stopped
    validation loss of every depth.  Ties go to the shallower tree.
    """
    depths = [int(k) for k in depths]
    if not depths:
        raise DomainError("depth grid is empty")
    if seeds is None:
        seeds = [cfg.seed] * len(depths)
    best, scores = None, {}
    for depth, seed in zip(depths, seeds):
        tree = TreeConfig(depth, cfg.tree.min_node, cfg.tree.min_split_improvement)
        c = replace(cfg, tree=tree, seed=int(seed))
        model = fit_boost(train, valid, basis, c)
        scores[depth] = float(model.valid_loss[model.t_stop - 1])
        if best is not None:
            best_depth = best.config.tree.max_depth
            if (scores[depth], depth) >= (scores[best_depth], best_depth):
                continue
        best = model
    return best, scores


def line_search(loss: Loss, y, F, h) -> float:
    """Step size minimizing the training loss along the fitted tree ``h``."""
    if isinstance(loss, SquaredLoss):
        den = float(h @ h)
        return float((y - F) @ h) / den if den > 0 else 0.0
    if not np.any(h):
        return 0.0
    return golden_section(lambda a: float(loss.value(y, F + a * h).sum()), 0.0, LINE_SEARCH_MAX)


def predict_boost(model: BoostModel, sample: FunctionalSample, t: Optional[int] = None) -> np.ndarray:
    """Boosted prediction after ``t`` iterations (default: the early-stopping time)."""
    if t is None:
        t = model.t_stop
    if not 0 <= t <= len(model.steps):
        raise DomainError(f"t must lie in [0, {len(model.steps)}]")
    if sample.q != model.n_scalars:
        raise DimensionError(f"model expects {model.n_scalars} scalar covariates, got {sample.q}")
    S = _scores(sample, model.basis)
    F = np.full(sample.n, model.f0)
    for tree, alpha in model.steps[:t]:
        F = F + model.gamma * alpha * predict_mit(tree, S, sample.scalars)
    return F


def staged_predict(model: BoostModel, sample: FunctionalSample) -> np.ndarray:
    """Predictions after every iteration, shape ``(len(steps) + 1, n)``."""
    S = _scores(sample, model.basis)
    out = np.empty((len(model.steps) + 1, sample.n))
    F = np.full(sample.n, model.f0)
    out[0] = F
    for i, (tree, alpha) in enumerate(model.steps):
        F = F + model.gamma * alpha * predict_mit(tree, S, sample.scalars)
        out[i + 1] = F
    return out


def mspe(model, test: FunctionalSample) -> float:
    """Mean squared prediction error of any fitted model with a ``predict`` route."""
    if test.response is None:
        raise DataError("test sample has no responses")
    if test.n == 0:
        raise DataError("test sample is empty")
    if isinstance(model, BoostModel):
        pred = predict_boost(model, test)
    else:
        pred = model.predict(test)
    r = pred - test.response
    return float(r @ r / test.n)


# ---------------------------------------------------------------------------
# persistence


def basis_to_dict(basis: BasisSystem) -> dict:
    return {
        "knots": basis.knots.tolist(),
        "degree": basis.degree,
        "n_interior": basis.n_interior,
        "m_q": basis.grid.m,
        "transform": basis.transform.tolist(),
    }


def basis_from_dict(doc: dict) -> BasisSystem:
    return basis_from_knots(doc["knots"], doc["degree"], doc["n_interior"], doc["m_q"],
                            doc["transform"])


def model_to_dict(model: BoostModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "basis": basis_to_dict(model.basis),
        "f0": model.f0,
        "t_stop": model.t_stop,
        "n_scalars": model.n_scalars,
        "train_loss": model.train_loss.tolist(),
        "valid_loss": model.valid_loss.tolist(),
        "steps": [{"alpha": a, "learner": m.to_dict()} for m, a in model.steps],
    }


def serialize(model: BoostModel) -> str:
    """Model as a self-contained JSON document (floats round-trip exactly)."""
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def load_document(text: str, expected_format: str, version: int = MODEL_VERSION) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"malformed model document at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    fmt = doc.get("format")
    if fmt != expected_format:
        raise ModelFormatError(f"expected format {expected_format!r}, found {fmt!r}")
    if doc.get("version") != version:
        raise UnsupportedVersionError(
            f"unsupported {expected_format} version {doc.get('version')!r}"
            f" (this build reads version {version})"
        )
    return doc


def deserialize(text: str) -> BoostModel:
    doc = load_document(text, MODEL_FORMAT)
    where = "document"
    try:
        where = "config"
        cfg = BoostConfig.from_dict(doc["config"])
        where = "basis"
        basis = basis_from_dict(doc["basis"])
        steps = []
        for i, step in enumerate(doc["steps"]):
            where = f"steps[{i}]"
            steps.append((MultiIndexTree.from_dict(step["learner"]), float(step["alpha"])))
        where = "traces"
        model = BoostModel(
            f0=float(doc["f0"]),
            steps=steps,
            t_stop=int(doc["t_stop"]),
            basis=basis,
            config=cfg,
            train_loss=np.asarray(doc["train_loss"], dtype=np.float64),
            valid_loss=np.asarray(doc["valid_loss"], dtype=np.float64),
            n_scalars=int(doc["n_scalars"]),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"invalid model document at {where}: {exc!r}") from None
    if not 0 <= model.t_stop <= len(model.steps):
        raise ModelFormatError("t_stop exceeds the number of stored steps")
    return model
