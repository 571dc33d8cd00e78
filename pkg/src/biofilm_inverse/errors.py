"""Exception hierarchy shared by the solver, recovery and fitting layers."""


class BiofilmError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BiofilmError, ValueError):
    """An argument lies outside the domain of a model function."""


class SingularityError(DomainError):
    """The diffusivity was evaluated at M >= 1 with a positive exponent ``a``."""

    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"diffusivity singular at M={value!r} (requires M < 1 when a > 0)")


class SingularSystemError(BiofilmError, ArithmeticError):
    """Tridiagonal elimination hit a pivot below the singularity threshold."""

    def __init__(self, row, pivot):
        self.row = row
        self.pivot = pivot
        super().__init__(f"singular tridiagonal system: pivot {pivot!r} at row {row}")


class BlowUpError(BiofilmError, ArithmeticError):
    """The forward march produced values beyond the instability threshold."""


class AssumptionError(BiofilmError):
    """A precondition of a closed-form recovery formula does not hold.

    ``clause`` names the failed assumption, ``details`` carries the
    offending quantities for diagnostics.
    """

    def __init__(self, clause, message, **details):
        self.clause = clause
        self.details = details
        super().__init__(f"assumption ({clause}) failed: {message}")


class MeasurementFormatError(BiofilmError, ValueError):
    """A measurement or field CSV file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ResidualEvaluationError(BiofilmError):
    """The forward model failed while evaluating residuals at a candidate."""

    def __init__(self, x, cause):
        self.x = x
        self.cause = cause
        super().__init__(f"residual evaluation failed at X={list(x)!r}: {cause}")
