"""Exception hierarchy shared by every fuzzyqos module."""


class FuzzyQosError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FuzzyQosError):
    """Invalid or incomplete configuration (policy, rule base, run config)."""


class InvalidParameterError(FuzzyQosError, ValueError):
    pass


class InvalidInputError(FuzzyQosError, ValueError):
    pass


class InvalidMeasurementError(FuzzyQosError, ValueError):
    pass


class InvalidSampleError(FuzzyQosError, ValueError):
    pass


class InvalidRequestError(FuzzyQosError, ValueError):
    pass


class NotFoundError(FuzzyQosError, KeyError):
    pass


class UndefinedMetricError(FuzzyQosError, ValueError):
    pass


class OversizeError(FuzzyQosError):
    """State space larger than the configured enumeration bound."""


class ParseError(FuzzyQosError):
    """Syntax or reference error in a rule or policy file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)
