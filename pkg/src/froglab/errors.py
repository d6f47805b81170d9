"""Exception types shared across the package."""


class FroglabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(FroglabError, ValueError):
    """A parameter violates its documented precondition."""


class ResourceLimitError(FroglabError, RuntimeError):
    """A configurable cost cap (polynomial order, recursion depth) was exceeded."""


class DimensionMismatchError(FroglabError, ValueError):
    """An argument vector does not match the expected arity."""


class MalformedPathError(FroglabError, ValueError):
    """A walk path does not satisfy the structural requirements of an operation."""


class InsufficientDataError(FroglabError, RuntimeError):
    """Too few conditioning events were observed to form an estimate."""
