"""Exception hierarchy shared by the library, the CLI and the dashboard.

Every error carries the process exit code the CLI should return for it.
"""


class S2SPMError(Exception):
    exit_code = 1


class DomainError(S2SPMError, ValueError):
    """Arguments outside the domain an operation is defined on."""

    exit_code = 2


class FullLikelihoodCeilingError(DomainError):
    pass


class DataError(S2SPMError):
    exit_code = 3


class EdgeListParseError(DataError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyGraphError(DataError):
    pass


class InfeasibleSplitError(DataError):
    pass


class TrainingDataError(DataError):
    pass


class AnnotationError(DataError):
    pass


class NumericError(S2SPMError, ArithmeticError):
    exit_code = 4


class DegenerateGateError(NumericError):
    pass


class NonFiniteGradientError(NumericError):
    pass


class EstimatorError(NumericError):
    pass


class UndefinedBnmiError(NumericError):
    pass


class UndefinedAucError(NumericError):
    pass


class DegeneratePcaError(NumericError):
    pass
