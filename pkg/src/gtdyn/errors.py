"""Exception hierarchy shared across the package."""


class GtdynError(Exception):
    """Base class for all package errors."""


class InvalidLayerError(GtdynError, ValueError):
    """A weight layer has negative entries, self-loops or the wrong shape."""


class LinkPreconditionError(GtdynError, ValueError):
    """A symmetric link removal was requested on an absent or asymmetric link."""


class ConnectivityLostError(GtdynError):
    """A topology mutation left the graph without strong connectivity."""


class ScheduleExhaustedError(GtdynError, IndexError):
    """The switching signal is undefined at the requested step."""


class NotStronglyConnectedError(GtdynError):
    """A Laplacian shows more than one structural zero eigenvalue."""


class DegenerateSpectrumError(GtdynError):
    """A bound cannot be formed because the spectrum carries no usable margin."""


class NumericFailureError(GtdynError):
    """An eigenvalue computation failed or missed its backward-error target."""

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class DivergenceError(GtdynError):
    """The simulated state became non-finite or exceeded the divergence threshold."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class OracleTimeoutError(GtdynError):
    """The centralized solver hit its iteration cap."""


class NonFiniteCostError(GtdynError):
    """The centralized solver encountered a non-finite objective value."""


class ConfigError(GtdynError, ValueError):
    """An experiment configuration is malformed or references missing files."""
