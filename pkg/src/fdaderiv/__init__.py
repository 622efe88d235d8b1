"""Local polynomial estimation of mean-function derivatives from functional data.

Curves ``Y_i(x_j) = mu(x_j) + Z_i(x_j) + eps_ij`` observed on a common grid
are averaged and smoothed with local polynomial weights; the package also
ships path simulators, a covariance smoothness diagnostic and a Monte Carlo
harness for convergence-rate experiments.
"""

__version__ = "0.1.0"

from .basis import BasisLayout, enumerate_basis
from .covdiag import DiagonalReport, smoothness_report
from .design import DesignDensity, DesignGrid, midpoint_grid, quantile_design
from .estimator import (
    DerivativeEstimate,
    FunctionalDataset,
    cv_bandwidth,
    estimate_derivative,
    periodic_augment,
)
from .exceptions import (
    ConfigError,
    DataFormatError,
    FdaDerivError,
    NoValidBandwidthError,
    OrderExceededError,
    SingularDesignError,
)
from .harness import SimConfig, bandwidth_sweep, error_decomposition, rate_table, simulate_dataset
from .processes import BrownianMotion, FractionalBM, RiemannLiouville, SmoothSine, sample_paths
from .weights import WeightSet, epanechnikov_product_kernel, local_poly_weights

__all__ = [
    "__version__",
    "BasisLayout",
    "enumerate_basis",
    "DiagonalReport",
    "smoothness_report",
    "DesignDensity",
    "DesignGrid",
    "midpoint_grid",
    "quantile_design",
    "DerivativeEstimate",
    "FunctionalDataset",
    "cv_bandwidth",
    "estimate_derivative",
    "periodic_augment",
    "ConfigError",
    "DataFormatError",
    "FdaDerivError",
    "NoValidBandwidthError",
    "OrderExceededError",
    "SingularDesignError",
    "SimConfig",
    "bandwidth_sweep",
    "error_decomposition",
    "rate_table",
    "simulate_dataset",
    "BrownianMotion",
    "FractionalBM",
    "RiemannLiouville",
    "SmoothSine",
    "sample_paths",
    "WeightSet",
    "epanechnikov_product_kernel",
    "local_poly_weights",
]
