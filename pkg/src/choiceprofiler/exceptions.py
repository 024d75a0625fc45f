"""Exception hierarchy shared across the package."""


class ChoiceProfilerError(Exception):
    """Base class for all package errors."""


class ConfigError(ChoiceProfilerError):
    """Invalid run configuration or command-line arguments."""


class ComparabilityError(ConfigError):
    """Result bundles that cannot be compared (different model/parameters)."""


class DataError(ChoiceProfilerError):
    """Problems with dataset files or dataset contents."""


class SchemaError(DataError):
    """Dataset file does not match the declared schema."""


class ParseError(DataError):
    """A cell could not be parsed; carries row/column context in the message."""


class DataValidationError(DataError):
    """A dataset invariant is violated; carries row context in the message."""


class SpecError(ChoiceProfilerError):
    """Model specification inconsistent with data or parameters."""


class EvaluationError(ChoiceProfilerError):
    """Likelihood evaluation failed (non-finite values, underflow, ...)."""


class StartPointError(EvaluationError):
    """Objective not finite at the requested start point."""


class InversionError(ChoiceProfilerError):
    """Matrix inversion failed; carries the reciprocal condition number."""

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class ContractError(ChoiceProfilerError):
    """An internal numerical contract was violated (e.g. asymmetric Hessian)."""


class OrderingError(ChoiceProfilerError):
    """Test inputs violate the required ordering (e.g. LL_u < LL_r)."""


class DegenerateTransformError(ChoiceProfilerError):
    """A derived quantity is undefined (e.g. ratio with zero denominator)."""
