"""Exception taxonomy shared by all rigidflow modules."""


class RigidflowError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RigidflowError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class RegionError(RigidflowError, ValueError):
    """A thermodynamic state left the configured hyperbolicity box.

    Carries the offending (p, s) point and the box so the caller can report
    where the simulation lost well-posedness.
    """

    def __init__(self, message, point=None, box=None, location=None):
        super().__init__(message)
        self.point = point
        self.box = box
        self.location = location


class ConstructionError(RigidflowError, ValueError):
    """Geometry or mesh construction invariants are violated."""


class ShapeError(RigidflowError, ValueError):
    """Array arguments have inconsistent shapes."""


class DegeneracyError(RigidflowError, RuntimeError):
    """The flow-map gradient determinant fell below the configured floor."""


class StepSizeError(RigidflowError, ValueError):
    """A requested time step violates the CFL bound."""


class UnsupportedOrderError(RigidflowError, ValueError):
    """A derivative or compatibility order beyond the supported cap."""


class InsufficientHistoryError(RigidflowError, RuntimeError):
    """A diagnostic needs more stored time levels than are available."""


class ContinuityError(RigidflowError, ValueError):
    """A coupling guess does not match the committed state at the window start."""


class NonConvergenceError(RigidflowError, RuntimeError):
    """The coupling iteration hit its cap; carries the last iterate distance."""

    def __init__(self, message, last_distance=None, iterations=None):
        super().__init__(message)
        self.last_distance = last_distance
        self.iterations = iterations


class ScenarioParseError(RigidflowError, ValueError):
    """Scenario file could not be parsed; carries the line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ScenarioValidationError(RigidflowError, ValueError):
    """Scenario parsed but violates a documented constraint."""
