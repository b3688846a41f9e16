"""Exception hierarchy shared by all engines.

Each family maps to a distinct CLI exit code (see :mod:`birkhoff_nlw.cli`).
"""


class BirkhoffError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(BirkhoffError, ValueError):
    """Invalid configuration: unknown key, bad value or violated hypothesis."""


class InvalidArgumentError(BirkhoffError, ValueError):
    """A precondition of a public operation is violated."""


class NearResonanceError(BirkhoffError):
    """A small divisor fell below the configured floor.

    Attributes
    ----------
    key : tuple
        The offending multi-index.
    divisor : float
        The value of the small divisor at ``key``.
    """

    def __init__(self, message, key=None, divisor=None):
        super().__init__(message)
        self.key = key
        self.divisor = divisor


class ResonanceDetectedError(NearResonanceError):
    """A divisor scan returned an exact zero minimum."""


class IntegrationError(BirkhoffError):
    """Numerical integration failed (step underflow, radius guard, ...)."""


class BlowUpError(BirkhoffError):
    """The simulated state left the small-amplitude regime.

    Attributes
    ----------
    time : float
        Simulation time at which the detector fired.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class CorruptedNormalFormError(BirkhoffError):
    """A normal-form component contains a key outside its class."""
