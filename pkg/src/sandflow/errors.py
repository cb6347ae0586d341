"""Exception types shared across the package."""


class MeshFormatError(ValueError):
    """Mesh file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshValidationError(ValueError):
    """Mesh violates a structural invariant (orientation, conformity, ...)."""


class GeometryError(ValueError):
    """Degenerate geometry (zero-area triangle and the like)."""


class EvaluationError(ValueError):
    """A user-supplied function produced a non-finite value."""


class FieldMismatchError(ValueError):
    """Fields defined on different meshes/topologies were combined."""


class NumericalError(RuntimeError):
    """Linear algebra breakdown: indefinite matrix, failed factorization."""


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap.

    Attributes carry the context needed for diagnosis: ``residual`` is the
    last convergence measure, ``step`` the time-step index (when applicable).
    """

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class ConfigError(ValueError):
    """Scenario configuration is missing, malformed or inconsistent."""
