"""Gradient boosting with functional multi-index trees for scalar-on-function regression."""

from .baselines import FlmModel, fit_flm1, fit_flm2
from .boost import (
    BoostConfig,
    BoostModel,
    HuberLoss,
    SquaredLoss,
    deserialize,
    fit_boost,
    fit_depth_grid,
    mspe,
    predict_boost,
    serialize,
    staged_predict,
)
from .cart import Tree, TreeConfig, fit_tree, predict_tree
from .errors import (
    ConstraintError,
    DataError,
    DimensionError,
    DomainError,
    ModelFormatError,
    NumericalError,
    RankError,
    TFBoostError,
    UnsupportedVersionError,
)
from .fda import BasisSystem, FunctionalSample, Grid, build_basis, fpca, project_scores
from .geometry import Direction
from .learners import MultiIndexTree, fit_type_a, fit_type_b, predict_mit

__version__ = "0.1.0"
