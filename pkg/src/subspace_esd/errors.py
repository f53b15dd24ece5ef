"""Exception hierarchy shared by every module."""


class SubspaceESDError(Exception):
    """Base class for all package errors."""


class InvalidDataError(SubspaceESDError, ValueError):
    """Input contains non-finite values or has the wrong structure."""


class InsufficientSamplesError(InvalidDataError):
    pass


class ShapeError(SubspaceESDError, ValueError):
    pass


class ParameterError(SubspaceESDError, ValueError):
    pass


class OracleScaleError(SubspaceESDError, ValueError):
    """Raised when a brute-force oracle is asked to run beyond desk scale."""


class InvalidBasisError(SubspaceESDError, ValueError):
    pass


class ConnectivityError(SubspaceESDError, ValueError):
    pass


class DegenerateError(SubspaceESDError, ValueError):
    pass


class UndefinedMetricError(SubspaceESDError, ValueError):
    pass


class SchemaError(SubspaceESDError, ValueError):
    pass


class ParseError(SubspaceESDError, ValueError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
