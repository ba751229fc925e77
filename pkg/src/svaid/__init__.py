"""Inertial-parameter identification for serial revolute chains using spatial vector algebra."""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    coriolis_matrix,
    forward_dynamics,
    gravity_vector,
    inverse_dynamics,
    mass_matrix,
    total_energy,
)
from .identify import OnlineEstimator, fit, fit_with_prior, stack  # noqa: E402
from .model import ChainModel, load_model, parse_model, serialize_model  # noqa: E402
from .regressor import compute_regressor, identifiable_columns  # noqa: E402

__all__ = [
    "ChainModel",
    "OnlineEstimator",
    "compute_regressor",
    "coriolis_matrix",
    "fit",
    "fit_with_prior",
    "forward_dynamics",
    "gravity_vector",
    "identifiable_columns",
    "inverse_dynamics",
    "load_model",
    "mass_matrix",
    "parse_model",
    "serialize_model",
    "stack",
    "total_energy",
]
