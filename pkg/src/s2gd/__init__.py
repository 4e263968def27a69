"""Semi-stochastic gradient descent: solvers, parameter planner and benchmark harness."""

from .dataio import (
    LibsvmFormatError,
    SparseDataset,
    generate_least_squares,
    generate_logistic,
    parse_libsvm,
    write_libsvm,
    write_trace_csv,
)
from .epoch_law import GeometricEpochLaw, beta, expected_length, make_rng, sample_epoch_length
from .objective import (
    ObjectiveSpec,
    SmoothnessInfo,
    component_gradient,
    component_value,
    full_gradient,
    objective_value,
    perturb,
    smoothness_constants,
)
from .solvers import (
    DivergenceError,
    RunResult,
    SolverConfig,
    gd,
    s2gd,
    s2gd_plus,
    s2gd_sparse,
    sag,
    sgd,
    svrg,
)
from .trace import ConvergenceTrace, TracePoint

__version__ = "0.1.0"
