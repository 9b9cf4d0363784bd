"""
Exception hierarchy for the LCP toolkit
Library modules raise these; lcp_app.py maps them to exit codes
"""

from typing import Optional


class LcpError(ValueError):
    """Root of every toolkit error"""


class DimensionMismatchError(LcpError):
    """Vector or matrix sizes do not agree"""

    def __init__(self, expected: int, actual: int, what: str = "vector"):
        super().__init__(f"{what} has length {actual}, expected {expected}")
        self.expected = expected
        self.actual = actual


class NonSquareMatrixError(LcpError):
    """Only square matrices are supported"""


class ZeroDiagonalError(LcpError):
    """A diagonal entry needed as a pivot is zero"""

    def __init__(self, index: int):
        super().__init__(f"zero diagonal entry at row {index}")
        self.index = index


class NotLowerTriangularError(LcpError):
    """Forward substitution was handed a matrix with upper entries"""


class MatrixMarketError(LcpError):
    """Malformed Matrix Market or vector file"""

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class InvalidParameterError(LcpError):
    """A method or solver parameter is outside its admissible range"""


class SingularLhsError(LcpError):
    """The matrix inverted every sweep is numerically singular"""


class SingularMatrixError(LcpError):
    """A matrix that must be inverted for classification is singular"""


class PMatrixLimitError(LcpError):
    """Principal-minor enumeration refused above the size cap"""


class NoSolutionError(LcpError):
    """Basis enumeration found no complementary solution"""


class MultipleSolutionsError(LcpError):
    """Basis enumeration found more than one complementary solution"""


class ConfigError(LcpError):
    """Invalid run configuration (CLI flags or JSON file)"""
