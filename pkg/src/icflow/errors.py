"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, flow or experiment configuration."""


class DomainError(ValueError):
    """Input outside the domain of a formula (e.g. t beyond blow-up, u <= 0)."""


class AdmissibilityError(ValueError):
    """Principal curvatures left the defining cone of the curvature function."""

    def __init__(self, message, node=None, kappa=None):
        super().__init__(message)
        self.node = node
        self.kappa = kappa


class NumericalError(RuntimeError):
    """A numerical kernel failed (non-finite values, failed eigen-solve)."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node
