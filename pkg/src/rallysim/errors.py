"""Exception types shared across the package.

Errors derived from :class:`DataError` indicate malformed or insufficient
input and map to CLI exit code 2; everything else is a programming or
configuration mistake and is allowed to propagate.
"""


class RallySimError(Exception):
    """Base class for all package-specific errors."""


class DataError(RallySimError):
    """Bad or insufficient input data (CLI exit code 2)."""


class ParseError(DataError):
    """A serialized record could not be parsed.

    Carries the 1-based line number when raised by the JSONL readers.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantViolation(DataError):
    """A record or value object failed a structural invariant."""


class InsufficientData(DataError):
    """Not enough samples/trajectories for the requested operation."""


class NonMonotonicTimestamp(DataError):
    """Samples pushed with non-increasing timestamps."""


class NotAnImpactState(RallySimError):
    """Bounce map applied to a velocity that is not moving into the table."""


class NonTermination(RallySimError):
    """Integration exceeded its horizon without meeting a stop condition."""


class NoPlaneCrossing(RallySimError):
    """Predicted flight never crosses the hit plane moving toward the robot."""


class DegenerateImpactDirection(RallySimError):
    """Incoming and outgoing velocities coincide; no impact normal exists."""


class NoApproach(RallySimError):
    """Ball does not approach the racket face; impact model undefined."""


class NoBounceFound(DataError):
    """A trajectory expected to contain a bounce has none."""


class MultipleBounces(DataError):
    """A trajectory expected to contain exactly one bounce has several."""


class InvalidSpec(DataError):
    """A launch specification is unsatisfiable or incomplete."""
