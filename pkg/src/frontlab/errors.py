"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or violated configuration invariants."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class NumericalError(RuntimeError):
    """The time stepper produced NaN or left [0, 1]."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class EstimationError(RuntimeError):
    """Not enough data for a statistical estimate."""


class ConstructionError(RuntimeError):
    """A geometric or initial-data construction failed its post-checks."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class JobError(RuntimeError):
    """One or more batch jobs failed; ``failures`` maps job id to message."""

    def __init__(self, failures: dict):
        self.failures = dict(failures)
        lines = "; ".join(f"{k}: {v}" for k, v in self.failures.items())
        super().__init__(f"{len(self.failures)} job(s) failed: {lines}")
