"""Simulation, conditional least squares estimation and limit laws for supercritical CBI processes."""
from ._kernels import BACKEND
from .estimate import EstimateResult, UndefinedEstimator, cls, cls_BA, estimate, wcls
from .jump_measures import JumpMeasure
from .model import CbiParams, DerivedParams, derive, limit_matrices, limit_variances
from .simulate import ObservationPath, Scheme, simulate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CbiParams",
    "DerivedParams",
    "EstimateResult",
    "JumpMeasure",
    "ObservationPath",
    "Scheme",
    "UndefinedEstimator",
    "cls",
    "cls_BA",
    "derive",
    "estimate",
    "limit_matrices",
    "limit_variances",
    "simulate",
    "wcls",
]
