"""Exception hierarchy shared by all modules."""


class IrrMpsError(Exception):
    """Base class for library errors."""


class ValidationError(IrrMpsError, ValueError):
    """Malformed input tensor, witness or configuration."""


class BudgetExceeded(IrrMpsError):
    """A dense state would exceed the configured amplitude budget."""


class DimensionMismatch(ValidationError):
    """Physical or bond dimensions of two operands disagree."""


class NumericalError(IrrMpsError):
    """Base class for failures of the numerical pipeline."""


class EigensolverFailure(NumericalError):
    pass


class NoUnitEigenvalue(NumericalError):
    pass


class NotIrreducible(NumericalError):
    pass


class PeripheralMismatch(NumericalError):
    """Peripheral spectrum is not a clean set of roots of unity."""


class ZeroTensor(NumericalError):
    """Every block of the tensor is nilpotent; the generated family is zero."""


class DecompositionError(NumericalError):
    pass


class InconsistentWitness(NumericalError):
    """A witness was constructed but failed its own verification."""


class IllConditioned(NumericalError):
    pass


class InsufficientData(ValidationError):
    pass


class NotAWitness(IrrMpsError):
    """The supplied data does not satisfy the precondition of a construction."""


class RankDeficient(NumericalError):
    pass


class GaugeFailure(NumericalError):
    pass
