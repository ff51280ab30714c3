"""Exception hierarchy shared by every vbag module."""


class VbagError(Exception):
    """Base class for all library errors."""


class DomainError(VbagError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NotPositiveDefinite(VbagError, ValueError):
    pass


class DimensionMismatch(VbagError, ValueError):
    pass


class InvalidSize(VbagError, ValueError):
    pass


class DegenerateVariance(VbagError, ValueError):
    """Bagged variance does not exceed the plain VB variance (or prior variance too small)."""


class NegativeDiscriminant(VbagError, ValueError):
    """Square-root argument of the finite-sample size formula is negative."""

    def __init__(self, message, inputs=None):
        super().__init__(message)
        self.inputs = inputs


class SingularDesign(VbagError, ValueError):
    pass


class SingularHessian(VbagError, ValueError):
    pass


class EmptyData(VbagError, ValueError):
    pass


class StructureMismatch(VbagError, ValueError):
    pass


class AllReplicatesFailed(VbagError, RuntimeError):
    pass


class ZeroReference(VbagError, ValueError):
    pass


class ConfigError(VbagError, ValueError):
    pass


class DegenerateDataWarning(UserWarning):
    """All observations identical while fitting more than one mixture component."""


class DegenerateSizeWarning(UserWarning):
    """Bootstrap-size selection fell back to a default value."""


class ClippingWarning(UserWarning):
    """Eigenvalue clipping was needed to make a recombined covariance PD."""
