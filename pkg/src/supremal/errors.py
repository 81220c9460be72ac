"""Exception types raised across the package."""


class SupremalError(Exception):
    """Base class for all package errors."""


class UnknownField(SupremalError, KeyError):
    pass


class OutOfBounds(SupremalError, ValueError):
    pass


class CoercivityViolation(SupremalError, ValueError):
    pass


class EmptyInput(SupremalError, ValueError):
    pass


class NotOnBoundary(SupremalError, ValueError):
    pass


class NotCoercive(SupremalError, ValueError):
    pass


class GridTooCoarse(SupremalError, ValueError):
    pass


class NotInHull(SupremalError, ValueError):
    pass


class NotLevelConvex(SupremalError, ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotApplicable(SupremalError, ValueError):
    pass


class NotBracketed(SupremalError, ValueError):
    pass


class NotInteriorPoint(SupremalError, ValueError):
    pass


class VerdictWasNotExists(SupremalError, RuntimeError):
    pass


class MalformedMesh(SupremalError, ValueError):
    pass


class ConfigError(SupremalError, ValueError):
    pass
