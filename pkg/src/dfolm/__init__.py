"""Derivative-free Levenberg-Marquardt solver with sampling-based Jacobians."""

from .bench import (
    BenchRecord,
    ProfileCurve,
    convergence_test,
    derive_seed,
    emit_csv,
    parse_curves_csv,
    parse_records_csv,
    performance_profile,
    run_grid,
)
from .directions import DirectionFrame, FramePool, build_pool, pick, sample_frame
from .jacobian import JacobianEstimate, OverflowSignal, estimate_fd, estimate_oss, gradient_model
from .probes import (
    AccuracyReport,
    ProbeProblem,
    affine_probe,
    min_sampling_size,
    probe_bias,
    probe_event_rate,
    probe_variance,
    quadratic_probe,
)
from .problems import (
    ResidualProblem,
    SUITE_IDS,
    apply_singular_modification,
    get_problem,
    make_suite,
    mgh_base,
)
from .solver import (
    GRADIENT_SMALL,
    MAX_ITER,
    OVERFLOW,
    IterationRecord,
    NumericalBreakdown,
    SolveResult,
    SolverConfig,
    reduction_ratio,
    run_solver,
    solve_lm_step,
    update_theta,
)

__version__ = "0.1.0"
