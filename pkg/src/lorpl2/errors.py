"""Exception types shared across the package."""


class Lorpl2Error(Exception):
    """Base class for all package errors."""


class WindowExceededError(Lorpl2Error):
    """A moment mu_{i,j} outside the provider's guaranteed window was requested."""

    def __init__(self, i, j, window):
        self.i, self.j, self.window = i, j, window
        super().__init__(f"moment ({i},{j}) outside window |i|,|j| <= {window}")


class QuadratureError(Lorpl2Error):
    """Adaptive quadrature failed to converge; carries the achieved tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class NotPositiveDefiniteError(Lorpl2Error):
    """Moment matrix is indefinite or numerically singular at some level."""

    def __init__(self, level, detail=""):
        self.level = level
        msg = f"moment matrix fails positive definiteness at level {level}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class AxisEvaluationError(Lorpl2Error):
    """Laurent polynomial evaluation requested on a coordinate axis."""


class DegenerateDenominatorError(Lorpl2Error):
    """Christoffel-Darboux denominator below threshold; use the confluent form."""


class RankHypothesisError(Lorpl2Error):
    """A rank condition required by the reconstruction theorem fails.

    `condition` names the failing hypothesis, e.g. 'rank D_1^{(0)}'.
    """

    def __init__(self, condition, detail=""):
        self.condition = condition
        msg = f"rank hypothesis violated: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class TableFormatError(Lorpl2Error):
    """Moment table file violates the lorpl2-moments-v1 schema."""
