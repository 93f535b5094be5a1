"""Exception types shared across the package."""


class IqpError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(IqpError):
    """Mismatched qubit counts or vector lengths."""


class CapacityError(IqpError):
    """An exact engine was asked for more qubits than its configured limit."""


class ConfigError(IqpError):
    """Invalid or inconsistent configuration values."""


class DataError(IqpError):
    """Missing, empty, or corrupt target statistics / datasets."""


class InvalidObservableError(IqpError):
    """Operation requires a nonempty qubit subset."""


class PreconditionError(IqpError):
    """A documented precondition of the operation does not hold."""


class TrainingAbort(IqpError):
    """Training hit a non-finite loss or gradient; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
