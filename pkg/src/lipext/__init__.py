"""Lipschitz index extension over modulus-composed metrics.

Given a finite set of feature vectors where an index value is known only on
a subset, this package extends the index to the remaining points by
Lipschitz regression, after optionally reshaping the base metric with a
subadditive strictly increasing modulus chosen by particle swarm search.
"""

from .constants import (
    ConstantsReport,
    IndexedSample,
    coherence_constant,
    constants_report,
    error_bound,
    index_bound,
    katetov_shift,
    normalization_constant,
)
from .extension import (
    ExtensionModel,
    FitError,
    blend_predict,
    fit_extension,
    mcshane_predict,
    optimal_alpha,
    predict,
    standard_index_fit,
    whitney_predict,
)
from .metrics import BASE_METRICS, CompositionMetric, base_distance, composed_distance
from .phi import (
    ATOM_NAMES,
    LINEAR_BASIS,
    SQRT_BASIS,
    PhiCombination,
    identity_phi,
    phi_eval,
    validate_modulus,
    validate_phi,
)
from .pipeline import (
    CvReport,
    Dataset,
    cross_validate,
    linear_fit,
    linear_predict,
    mae,
    minmax_scale,
    rank,
    rmse,
    smape,
    split,
)
from .swarm import PsoConfig, SwarmResult, objective_kq, pso_minimize

__version__ = "0.1.0"

__all__ = [
    "ATOM_NAMES",
    "BASE_METRICS",
    "LINEAR_BASIS",
    "SQRT_BASIS",
    "CompositionMetric",
    "ConstantsReport",
    "CvReport",
    "Dataset",
    "ExtensionModel",
    "FitError",
    "IndexedSample",
    "PhiCombination",
    "PsoConfig",
    "SwarmResult",
    "base_distance",
    "blend_predict",
    "coherence_constant",
    "composed_distance",
    "constants_report",
    "cross_validate",
    "error_bound",
    "fit_extension",
    "identity_phi",
    "index_bound",
    "katetov_shift",
    "linear_fit",
    "linear_predict",
    "mae",
    "mcshane_predict",
    "minmax_scale",
    "normalization_constant",
    "objective_kq",
    "optimal_alpha",
    "phi_eval",
    "predict",
    "pso_minimize",
    "rank",
    "rmse",
    "smape",
    "split",
    "standard_index_fit",
    "validate_modulus",
    "validate_phi",
    "whitney_predict",
]
