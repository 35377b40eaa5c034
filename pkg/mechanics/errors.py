"""
Junction - Plate-Rod Limit Model Solver
Exception Types

All input/precondition failures derive from JunctionError, which is also a
ValueError so callers that only care about bad values can catch that.
"""


class JunctionError(ValueError):
    """Base class for every error raised by the numerical core."""
    pass


class GeometryError(JunctionError):
    """Invalid domain, mesh resolution or quadrature request."""
    pass


class MaterialError(JunctionError):
    """Material constants out of range or inconsistent."""
    pass


class ExpressionError(JunctionError):
    """Force expression failed to parse or uses a forbidden construct."""
    pass


class ForceDataError(JunctionError):
    """Force field specification or table is unusable."""
    pass


class DofMapError(JunctionError):
    """DOF layout does not match the meshes or the state vector."""
    pass


class DomainError(JunctionError):
    """Point evaluation requested outside a field's domain."""
    pass


class RecoveryError(JunctionError):
    """Plateau parameter or thickness violates the recovery preconditions."""
    pass


class DecompositionError(JunctionError):
    """Sampled field cannot be decomposed as requested."""
    pass


class SampledFieldError(JunctionError):
    """Malformed sampled-field file. Carries the offending data row when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SolverError(JunctionError):
    """Invalid solver options or continuation schedule."""
    pass
