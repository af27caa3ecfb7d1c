"""Exception hierarchy. The CLI maps these onto exit codes."""


class DTAError(Exception):
    """Base class for all package errors."""


class DomainError(DTAError, ValueError):
    """Argument outside the domain of a mathematical function."""


class SingularMatrixError(DTAError, ArithmeticError):
    """A matrix that must be inverted or factored is (numerically) singular."""

    def __init__(self, det, msg=None):
        self.det = det
        super().__init__(msg or f"singular matrix (det={det:.3e})")


class InputError(DTAError, ValueError):
    """Malformed or invalid study data."""

    def __init__(self, msg, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)


class FitError(DTAError, RuntimeError):
    """Model fitting failed (insufficient data, singular system, ...)."""


class TestError(DTAError, RuntimeError):
    """A hypothesis test could not be computed."""

    __test__ = False  # keep pytest from collecting this
