"""Parameter-reduction toolkit.

Sensitivity Fisher information matrices, active/inactive subspace
partitions, low-rank model surrogates, and parameter profiles for
algebraic maps and ODE systems, with tabular artifacts for plotting.
"""

from .accel import USING_NUMBA, backend_name
from .core import (
    ModelOutputSpec,
    ParameterSpace,
    ParametricModel,
    evaluate,
    scalar_cost_qoi,
    scale_to_unit,
    unscale_from_unit,
)
from .ode import OdeSystem, PeriodEstimate, Trajectory, estimate_period, integrate
from .profiling import (
    ConfidenceInterval,
    ProfileTrace,
    chi2_threshold,
    classify_profile,
    nelder_mead,
    profile_parameter,
    relationship_table,
)
from .sensitivity import (
    EigenAnalysis,
    Jacobian,
    Sfim,
    eigendecompose,
    identifiability_verdict,
    jacobian_fd,
    local_sfim,
)
from .subspace import (
    AverageSfim,
    FixedR,
    GapAfterLargestRatio,
    SampleSet,
    SubspacePartition,
    Threshold,
    average_sfim,
    low_rank_eval,
    partition,
    sample,
    summary_table,
)

__version__ = "0.1.0"
