"""Exception types raised across the package."""


class LaneManifoldError(Exception):
    """Base class for all errors raised by lanemanifold."""


class NonFiniteError(LaneManifoldError, ValueError):
    pass


class NotPositiveDefiniteError(LaneManifoldError, ValueError):
    pass


class MatrixOverflowError(LaneManifoldError, OverflowError):
    pass


class BadLengthError(LaneManifoldError, ValueError):
    pass


class DimensionMismatchError(LaneManifoldError, ValueError):
    pass


class BaseMismatchError(LaneManifoldError, ValueError):
    """A tangent vector was used at a base point other than its own."""


class EmptyInputError(LaneManifoldError, ValueError):
    pass


class NotConvergedError(LaneManifoldError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance.

    The best iterate is kept on ``result`` so callers can still inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class EmptyClusterError(LaneManifoldError, ValueError):
    pass


class BadTemperatureError(LaneManifoldError, ValueError):
    pass


class BadRadiusError(LaneManifoldError, ValueError):
    pass


class LengthMismatchError(LaneManifoldError, ValueError):
    pass


class OutOfRangeError(LaneManifoldError, ValueError):
    pass


class DegenerateTangentError(LaneManifoldError, ValueError):
    pass


class DisconnectedError(LaneManifoldError, RuntimeError):
    pass


class NoMatchesError(LaneManifoldError, ValueError):
    pass


class SchemaError(LaneManifoldError, ValueError):
    """Input document does not follow the expected JSON layout."""
