"""Exception hierarchy shared by all chemsical modules."""


class ChemsicalError(Exception):
    """Base class for every error raised by this package."""


class ModelError(ChemsicalError):
    """A state or reaction refers to species the model does not declare."""


class InfeasibleFiringError(ChemsicalError):
    """A reaction was fired without enough reactant molecules."""


class SolverError(ChemsicalError):
    """The ODE integrator or the stochastic kernel failed."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(ChemsicalError, ValueError):
    """A configuration document or parameter set is invalid."""


class UnsupportedError(ConfigError):
    """The requested variant is outside what the builder supports."""


class TuningError(ChemsicalError):
    """An oscillator parameterisation does not oscillate."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MalformedTreeError(ChemsicalError, ValueError):
    """A threshold tree lacks the prefix needed for a decision."""


class ResampleRequiredError(ChemsicalError, ValueError):
    """Spectral analysis needs a uniform sampling grid."""
