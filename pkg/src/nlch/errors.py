"""Exception types shared by all nlch modules."""


class NlchError(Exception):
    """Base class for all package errors."""


class ConfigError(NlchError):
    """Invalid configuration value, unknown key, or unusable parameter combination."""


class DimensionError(NlchError):
    """Fields or operators living on incompatible grids."""


class CompatibilityError(NlchError):
    """Right-hand side violates a solvability constraint (e.g. nonzero mean)."""


class SolverError(NlchError):
    """A linear solver failed to reach its target residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepError(NlchError):
    """The nonlinear time-step iteration diverged or produced an invalid state."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class AssumptionError(NlchError):
    """A named structural assumption or theorem hypothesis fails to hold."""

    def __init__(self, name, message, value=None):
        super().__init__(f"{name}: {message}")
        self.name = name
        self.value = value


class InapplicabilityError(NlchError):
    """The requested operation is outside its domain of validity."""


class ComparisonError(NlchError):
    """Trajectories cannot be compared (misaligned time grids or parameters)."""


class FitError(NlchError):
    """Not enough usable points for a rate fit."""


class StiffnessError(NlchError):
    """The adaptive ODE integrator underflowed its step size."""
