"""Semantic exception hierarchy shared across the package."""


class NuvError(Exception):
    """Base class for all nuvbox errors."""


class InconsistentDirac(NuvError):
    """Product of two zero-variance messages with unequal means."""


class DimensionMismatch(NuvError):
    """Array shapes do not line up with the declared model dimensions."""


class InvalidProblem(NuvError):
    """Problem data contains non-finite or otherwise unusable values."""


class NotApplicable(NuvError):
    """Requested quantity is undefined for the given prior type."""


class UnderdeterminedModel(NuvError):
    """Posterior covariance is not finite: some variable is unconstrained."""


class NonConvergence(NuvError):
    """Iteration budget exhausted before the convergence criterion was met.

    Carries the partial result (a report object) in :attr:`report`.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(NuvError):
    """Scenario or CLI configuration could not be parsed or validated."""


class InfeasibleConfig(ConfigError):
    """Configuration describes an empty feasible set (e.g. inverted box bounds)."""
