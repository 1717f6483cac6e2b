"""Exception types raised by odofusion."""


class FusionError(Exception):
    """Base class for all odofusion errors."""


class ConfigurationError(FusionError, ValueError):
    """Invalid grid, noise, trajectory or experiment configuration."""


class WindowExceedsTraceError(FusionError, IndexError):
    """A requested GPS index falls outside the trace; shrink the window."""


class NoAbsoluteFixError(FusionError):
    """No GPS fix is available to anchor a windowed estimate."""


class MissingFixError(FusionError):
    """A scheduled GPS fix inside an estimation window is missing."""


class NumericalError(FusionError, ArithmeticError):
    """Base class for numerical failures (CLI exit status 3)."""


class NotSPDError(NumericalError):
    """Matrix failed a Cholesky factorization."""


class ConvergenceError(NumericalError):
    """An iterative search did not converge within its budget."""


class TraceFormatError(FusionError, ValueError):
    """Malformed sensor log or trace file."""


class AlignmentError(TraceFormatError):
    """A GPS timestamp cannot be snapped onto a GPS epoch of the grid."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ExperimentError(FusionError):
    """An estimator failed inside a Monte-Carlo run."""

    def __init__(self, sim_index, tag, cause):
        super().__init__(f"simulation {sim_index}, estimator {tag}: {cause}")
        self.sim_index = sim_index
        self.tag = tag
        self.cause = cause
