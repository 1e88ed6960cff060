"""Exception hierarchy shared by every module."""


class FormationError(Exception):
    """Base class for all errors raised by blfformation."""


class ValidationError(FormationError, ValueError):
    """A scenario or graph violates one of its invariants."""


class DisconnectedGraph(ValidationError):
    pass


class SelfEdge(ValidationError):
    pass


class DuplicateEdge(ValidationError):
    pass


class InvalidBounds(ValidationError):
    pass


class UnknownAgent(FormationError, KeyError):
    pass


class OutOfDomain(FormationError, ValueError):
    """Barrier evaluated at or beyond one of its distance bounds."""


class NonFiniteState(FormationError, FloatingPointError):
    pass


class ScenarioInvalid(ValidationError):
    """Stability hypotheses (admissible start, target slower than u_max) fail."""


class ZeroNoise(FormationError, ValueError):
    pass


class ParseError(FormationError, ValueError):
    """Scenario text could not be parsed; carries the offending line or key."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
