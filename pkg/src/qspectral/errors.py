"""Exception hierarchy shared by all qspectral modules."""


class QSpectralError(Exception):
    """Base class for every error raised by the library."""


class DomainError(QSpectralError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class PoleError(DomainError):
    """A transform was evaluated on (or too close to) an atom of its measure."""


class ConvergenceError(QSpectralError, ArithmeticError):
    """An iterative evaluation hit its cap before meeting its tolerance.

    ``last_term`` carries the magnitude of the last contribution so callers
    can judge how far from convergence the evaluation stopped.
    """

    def __init__(self, message, last_term=None):
        super().__init__(message)
        self.last_term = last_term


class TruncationError(ConvergenceError):
    """A truncated-matrix computation did not stabilise under doubling."""


class NumericError(QSpectralError, ArithmeticError):
    """A linear-algebra kernel failed (e.g. eigensolver non-convergence)."""


class SimulationRunaway(QSpectralError, RuntimeError):
    """A simulated path exceeded the maximum number of events."""
