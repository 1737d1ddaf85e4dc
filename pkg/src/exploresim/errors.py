"""Exception types shared across the simulator."""


class ExploresimError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ExploresimError):
    """A world file does not conform to the ASCII floorplan format."""


class ValidationError(ExploresimError):
    """A floorplan violates a structural invariant (open boundary, disconnected space, ...)."""


class GenerationError(ExploresimError):
    """The procedural generator could not satisfy its constraints."""


class InvalidState(ExploresimError):
    """An operation was invoked from a pose that is not legal for it."""


class NoPath(ExploresimError):
    """No path exists between start and goal under the query's map semantics."""


class InvalidStart(ExploresimError):
    """The start cell of a planning query is not passable."""


class NegativeCoverage(ExploresimError):
    """Coverage decreased between two maps that should be ordered (caller bug)."""


class EmptyInput(ExploresimError):
    """An aggregate was requested over zero records."""


class EmptyLog(ExploresimError):
    """A localization query was made against an empty experience log."""
