"""Gaussian comparison inequalities and their application to spin-glass free energies."""
__version__ = "0.1.0"

from .errors import GlassInterpError
from .gaussian_core import (
    CovarianceMatrix,
    FactorMatrix,
    MetricMatrix,
    factor_covariance,
    is_euclidean_metric,
    metric_from_covariance,
    sample_gaussian,
    validate_covariance,
)
from .interpolation import (
    estimate_F,
    interpolation_rhs,
    simplex_G_nonneg,
    verify_inequality,
)

__all__ = [
    "__version__",
    "GlassInterpError",
    "CovarianceMatrix",
    "FactorMatrix",
    "MetricMatrix",
    "factor_covariance",
    "is_euclidean_metric",
    "metric_from_covariance",
    "sample_gaussian",
    "validate_covariance",
    "estimate_F",
    "interpolation_rhs",
    "simplex_G_nonneg",
    "verify_inequality",
]
