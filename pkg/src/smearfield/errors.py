"""Exception hierarchy shared by all modules."""


class SmearfieldError(Exception):
    """Base class for every error raised by the package."""


class DegenerateError(SmearfieldError, ArithmeticError):
    """A test function or envelope has zero norm where a positive one is needed."""


class QuadratureMismatch(SmearfieldError, ValueError):
    """Objects built on different mass-shell quadratures or masses were combined."""


class ContextMismatch(SmearfieldError, ValueError):
    """Operator polynomials from different field contexts were combined."""


class ProjectionError(SmearfieldError, ValueError):
    """A single-particle vector lies outside the span modelled by a Fock space."""


class GeometryError(SmearfieldError, ValueError):
    """A causal-geometry precondition does not hold."""


class ConfigError(SmearfieldError, ValueError):
    """Run configuration failed validation."""
