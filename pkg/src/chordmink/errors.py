class ChordMinkError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidMeasureError(ChordMinkError, ValueError):
    pass


class BudgetExceededError(ChordMinkError):
    """Raised when an exhaustive enumeration would exceed its subset budget."""


class DegenerateShapeError(ChordMinkError):
    """Raised when a halfspace intersection has empty interior."""


class NotInteriorError(ChordMinkError, ValueError):
    pass


class AdmissibilityError(ChordMinkError):
    """Raised when input data violates a hypothesis required for solvability."""


class ConvergenceError(ChordMinkError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
