"""Exception types raised across the package."""


class DegenerateGeometryError(ValueError):
    """BS and UAV positions coincide (or are numerically indistinguishable)."""


class DegenerateInformationError(ArithmeticError):
    """The channel Fisher information is singular or too ill-conditioned to invert.

    Usually means the pilot codebook does not illuminate the UAV; raise the
    transmit power, add pilots, or move the UAV off the array nulls.
    """


class NumericalError(ArithmeticError):
    """A matrix factorization or inversion failed its conditioning check."""


class FilterDivergenceError(NumericalError):
    """The EKF covariance trace exceeded the configured bound."""


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""
