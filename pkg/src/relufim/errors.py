"""Exception types raised across the package."""

from __future__ import annotations


class InvalidDimensionError(ValueError):
    """Shapes or sizes do not line up (zero width, vector length mismatch)."""


class BasisIndexError(IndexError):
    """An eigenvector / limit-function index is outside its admissible range."""


class DegenerateColumnError(ValueError):
    """A hidden unit has an all-zero weight column, so 1/||W^(i)|| is undefined."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a formula (e.g. x = 0, b = 0)."""


class ExplicitModeRefused(ValueError):
    """Dense m x m Fisher matrix requested above the configured width cap."""


class EstimationError(ValueError):
    """A statistical estimate cannot be formed (too few samples, all-zero signal)."""


class RankDeficiencyError(ValueError):
    """Gram matrix of a basis is singular (e.g. duplicated basis vectors)."""


class IntegrandError(ValueError):
    """Quadrature integrand produced a non-finite value."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ToleranceFailure(RuntimeError):
    """One or more oracle rows fell outside tolerance."""

    def __init__(self, failing: list[str]):
        super().__init__("tolerance failure in: " + ", ".join(failing))
        self.failing = failing


class HypothesisWarning(UserWarning):
    """A closed form is evaluated outside the dimension range it was derived for."""
