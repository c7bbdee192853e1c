"""Relative and absolute kinematics of anchorless mobile networks from two-way ranging."""

from .errors import (
    AmbiguityError,
    ConfigError,
    DegenerateGeometryError,
    DependencyError,
    DimensionError,
    IdentifiabilityError,
    InsufficientConstraintError,
    KinemdsError,
    NotSupportedError,
    NumericalError,
    ParameterError,
    RankDeficiencyError,
    SingularGeometryError,
)
from .kernels import BACKEND

__version__ = "0.1.0"
