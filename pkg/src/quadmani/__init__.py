"""Quadratic manifolds with greedily selected singular-vector bases."""

from .baselines import AmConfig, AmState, am_fit, leading_fit, linear_manifold, pca_error
from .diagnostics import (
    CorrelationReport,
    EvalReport,
    correlation_matrix,
    lower_bound,
    relative_error,
    singular_value_report,
)
from .encoders import GnConfig, GnInit, decode, encode_gauss_newton, encode_linear
from .features import FeatureMapId, quad_features, quad_jacobian
from .greedy import GreedyConfig, GreedyTrace, candidate_objective, greedy_fit, select_gamma
from .manifold import QuadraticManifold, read_manifold, write_manifold
from .matrixio import CenteringShift, apply_shift, center_columns, read_matrix, write_matrix
from .ridge import RidgeProblem, ridge_solve
from .svdcore import IndexSets, SvdFactorization, residual_factors, thin_svd

__version__ = "0.1.0"
