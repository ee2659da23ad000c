"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ValidationError -> 2,
TrainingError -> 3, anything I/O related -> 4.
"""


class FraudEbmError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FraudEbmError, ValueError):
    """Bad inputs: malformed data, out-of-range parameters, schema breaches."""


class TrainingError(FraudEbmError, RuntimeError):
    """A model could not be trained (e.g. single-class labels)."""
