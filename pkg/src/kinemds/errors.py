"""Exception hierarchy.

Two families matter to callers: configuration problems (bad inputs, exit
code 2 from the CLI) and numerical problems (rank deficiency, degenerate
geometry, exit code 3).
"""

from __future__ import annotations


class KinemdsError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(KinemdsError, ValueError):
    """Invalid experiment configuration or parameter."""


class ParameterError(ConfigError):
    """A scalar or vector parameter is outside its valid range."""


class DimensionError(ConfigError):
    """Array shapes do not agree."""


class DependencyError(ConfigError):
    """A computation was requested without the inputs it depends on."""


class InsufficientConstraintError(ConfigError):
    """Too few constraints to make the problem identifiable."""


class NumericalError(KinemdsError, ArithmeticError):
    """Base class for failures of the numerical machinery."""


class RankDeficiencyError(NumericalError):
    """A linear system lacks the rank required for a unique solution."""


class IdentifiabilityError(NumericalError):
    """The measurements cannot determine the requested parameters."""


class SingularGeometryError(NumericalError):
    """Coincident nodes or otherwise degenerate geometry."""


class DegenerateGeometryError(NumericalError):
    """Not enough positive eigenvalues for the requested embedding."""


class AmbiguityError(NumericalError):
    """The rotation of an embedding cannot be resolved from the data."""


class NotSupportedError(ConfigError, NotImplementedError):
    """The requested order or mode has no implementation."""
