"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`FlowLabError`, so callers (and the CLI) can separate numerical
failures from programming errors.  The CLI maps :class:`ConfigError` to exit
code 1 and :class:`ConsistencyError` / :class:`StepSizeError` to exit code 2.
"""


class FlowLabError(Exception):
    """Base class for all package errors."""


class DomainError(FlowLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UndefinedQuotientError(FlowLabError, ZeroDivisionError):
    """A quotient such as ``s_k / s_{k-1}`` has a (near) zero denominator."""


class PreconditionError(FlowLabError, ValueError):
    """A documented precondition of an operation does not hold."""


class DegenerateInputError(PreconditionError):
    """Input makes a ratio meaningless (e.g. an identically zero function)."""


class UnsupportedBarrierError(PreconditionError):
    """The operation is not defined for the given barrier kind."""


class ResolutionError(PreconditionError):
    """Too few nodes for the requested stencil."""


class GeometryError(FlowLabError):
    """A discrete surface is invalid (off-barrier node, r = 0 off axis, ...)."""


class NumericalError(FlowLabError, ArithmeticError):
    """A numerical routine failed (e.g. an eigendecomposition)."""


class ConsistencyError(FlowLabError):
    """A quantity the theory guarantees was violated numerically."""


class MeanConvexityError(ConsistencyError):
    """H <= 0 was encountered where mean-convexity is required."""


class StepSizeError(FlowLabError):
    """A requested time step exceeds the stability (CFL) bound."""


class ConfigError(FlowLabError, ValueError):
    """A run configuration failed to parse or validate."""
