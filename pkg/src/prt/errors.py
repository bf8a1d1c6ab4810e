"""Exception classes shared across the toolkit."""


class PrtError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(PrtError):
    """An input vector or matrix has the wrong shape."""


class NonFiniteError(PrtError):
    """A model or kernel produced NaN or Inf."""


class OutOfBoundsError(PrtError):
    """A parameter vector lies outside its declared bounds."""


class StepSizeUnderflowError(PrtError):
    """The adaptive integrator could not meet the tolerance (stiffness or blow-up)."""


class NonFiniteStateError(PrtError):
    """The ODE state became NaN/Inf during integration."""


class NotPeriodicError(PrtError):
    """No usable oscillation found: too few peaks or irregular inter-peak spacing."""


class ConvergenceFailureError(PrtError):
    """An iterative solver exhausted its sweep/iteration budget."""


class DegenerateGapError(PrtError):
    """No eigenvalue gap above the configured ratio; an explicit rank is required."""


class ProjectionOutOfDomainError(PrtError):
    """The model cannot be evaluated at the subspace-projected parameter point."""


class AlignmentMismatchError(PrtError):
    """Per-sample values do not line up with the sample set they describe."""


class TooManyFailuresError(PrtError):
    """More than half of the sampled points failed to evaluate."""


class InsufficientTraceError(PrtError):
    """A profile trace has too few successful grid points to classify."""


class MalformedCsvError(PrtError):
    """A CSV artifact could not be parsed against the expected schema."""


class ConfigError(PrtError):
    """A run configuration is missing, malformed, or inconsistent."""
