"""Single-call stochastic extragradient methods for finite-sum variational
inequalities, under arbitrary sampling, with certified constants,
analysis-driven step-size schedules, brute-force verification oracles, and a
benchmark CLI (``vibench``)."""

from .core import (
    CertificationError,
    ComponentOperator,
    DimensionMismatch,
    FiniteSumProblem,
    NoiseConstants,
    ProblemConstants,
    VibenchError,
    affine_operator,
    as_point,
    certify_constants,
    component_star_norms_sq,
    component_values,
    evaluate_full,
)
from .sampling import (
    MonteCarloEstimate,
    SamplerSpec,
    SamplingVector,
    apply_estimator,
    draw,
    estimate_sigma_star,
    importance_delta,
    importance_probabilities,
    minibatch_noise_constants,
    noise_constants_for,
    single_element_noise_constants,
    uniform_single_element_delta,
)
from .schedules import (
    ScheduleError,
    StepSizePlan,
    constant_step,
    horizon_step,
    hsieh_step,
    switching_step,
    switching_threshold,
    weak_mvi_batchsize,
    weak_mvi_steps,
)
from .solvers import Trace, TraceRecord, peg_run, sog_run, speg_run, weak_mvi_speg_run
from .problems import (
    QuadraticGameSpec,
    WeakMviSpec,
    generate_diagonal_game,
    generate_quadratic_game,
    generate_weak_mvi_problem,
    load_problem,
    quadratic_payoff,
    regression_counterexample,
    save_problem,
)
from .oracle import (
    ConditionReport,
    check_hierarchy,
    check_quasi_strong,
    check_weak_mvi,
    enumerate_covariance,
    enumerate_minibatch_residual,
    enumerate_sigma_star,
    exact_residual,
    exact_second_moment,
    exact_variance,
)

__version__ = "0.1.0"
