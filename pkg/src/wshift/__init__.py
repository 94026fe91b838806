"""Minimum-Wasserstein (W-) estimation of target means under covariate shift and missing data."""
from .core import (EstimateReport, Functional, MissingDataset, SourceDataset, TargetDataset, constant,
                   coordinate_product, parse_functional, response)
from .estimators_cs import cdf_estimate, enhanced_w_estimate, w_estimate
from .estimators_md import md_enhanced_w_estimate, md_w_estimate
from .nn_transport import BACKEND, nn_assign_indexed, nn_weights

__version__ = "0.1.0"
