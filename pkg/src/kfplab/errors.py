"""Exception types shared across the package."""


class KfpError(Exception):
    """Base class for package errors."""


class ShapeError(KfpError):
    """Operator shape data violates the structural hypotheses."""


class ToleranceError(KfpError):
    """A root finder failed to bracket or converge."""


class DomainError(KfpError):
    """Evaluation requested at a point where the quantity is undefined."""


class PoleError(KfpError):
    """Kernel evaluation at its pole."""


class QuadratureError(KfpError):
    """A quadrature rule's error estimate exceeds the requested tolerance."""


class EllipticityError(KfpError):
    """Coefficient matrix violates the uniform ellipticity bounds."""


class ConstructionError(KfpError):
    """Dyadic grid construction could not satisfy the grid axioms."""


class DominationFailure(KfpError):
    """Sparse domination failed on more than the allowed cell fraction."""


class ConditionFailure(KfpError):
    """A Phi-function condition check failed; message names the condition."""


class BracketError(KfpError):
    """Luxemburg-norm bisection could not bracket the unit modular."""


class ConfigError(KfpError):
    """Experiment configuration is missing or malformed."""


class GoldenMismatch(KfpError):
    """A recomputed table disagrees with its committed golden file."""
