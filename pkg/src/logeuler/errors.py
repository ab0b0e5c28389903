"""Error types shared across the package."""


class LogEulerError(Exception):
    """Base class for all package errors."""


class ValidationError(LogEulerError):
    """Invalid configuration or construction request (CLI exit code 2)."""


class NumericalError(LogEulerError):
    """Numerical failure during a run (CLI exit code 3)."""


class NonZeroMean(ValidationError):
    """Field has a mean mode too large for the inverse-Laplacian inversion."""


class NegativeOrderOnMean(ValidationError):
    """Negative-order Sobolev norm requested for a field with nonzero mean."""


class Unresolvable(ValidationError):
    """Requested structure is below the grid resolution threshold."""


class BadRange(ValidationError):
    """Empty dyadic level range (a_A >= b_A)."""


class OutOfBox(ValidationError):
    """Translated supports do not fit inside the periodic box."""


class WrongQuadrant(ValidationError):
    """Point outside the open first quadrant."""


class InvalidKind(ValidationError):
    """Operation not defined for this multiplier kind."""


class NegativeOnQuadrant(ValidationError):
    """Data fails the first-quadrant sign requirement."""


class GridMismatch(ValidationError):
    """Two fields or runs do not share a grid."""


class CflViolation(NumericalError):
    """Time step exceeds the advective CFL limit."""


class NanDetected(NumericalError):
    """Non-finite values appeared in the state (discretization blow-up)."""


class ParticleEscaped(NumericalError):
    """A tracked particle left the inner half of the box."""


class EmptySupport(ValidationError):
    """No samples above the support threshold."""


class InsufficientData(ValidationError):
    """A report was requested from a run record missing required series."""


class NoDeformation(NumericalError):
    """Deformation too weak to place the inflation perturbation."""


class OverlapWarning(UserWarning):
    """Translated supports intersect (non-fatal)."""
