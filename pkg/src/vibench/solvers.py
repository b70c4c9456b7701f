"""Single-call extragradient state machines with trace recording.

The past-extragradient recursion reuses the previous iteration's estimator
value for the extrapolation step:

    xhat_k  = x_k - gamma_k * g_{k-1}        (g_{k-1} cached from step k-1)
    x_{k+1} = x_k - omega_k * g_k,           g_k = F_{v_k}(xhat_k)

so each iteration costs a single estimator evaluation.  Two initialization
conventions exist for the first extrapolation and both are implemented: the
default ``zero_cache`` sets xhat_0 = x_0 (zero cached value); ``warm_start``
spends one extra estimator call at x_0.  Every trace records which one was
used.

The optimistic-gradient form iterates the extrapolated sequence directly:

    y_{k+1} = y_k - omega * g_k - gamma * (g_k - g_{k-1}),   g_k = F_{v_k}(y_k)

and coincides with the xhat_k sequence of the past-extragradient recursion
under constant steps and a shared draw stream.

Runs are strictly sequential; concurrency across runs requires independent
RNG streams (pass distinct seeds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FiniteSumProblem, VibenchError, as_point, evaluate_full
from .sampling import SamplerSpec, apply_estimator, draw
from .schedules import ScheduleError, StepSizePlan, validate_weak_mvi_steps

__all__ = [
    "TraceRecord",
    "Trace",
    "default_stride",
    "speg_run",
    "sog_run",
    "peg_run",
    "weak_mvi_speg_run",
]

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class TraceRecord:
    """Metrics at the top of one iteration.

    ``sq_dist`` is ||x_k - x*||^2; ``r_metric`` adds ||x_k - xhat_{k-1}||^2 (the
    Lyapunov quantity of the quasi-strong analysis); ``op_norm_sq`` is the full
    operator norm squared at the current extrapolation point;
    ``oracle_calls`` counts component evaluations made through this iteration.
    Distance metrics are NaN when the problem has no known solution.
    """

    k: int
    gamma: float
    omega: float
    sq_dist: float
    r_metric: float
    op_norm_sq: float
    oracle_calls: int


@dataclass
class Trace:
    """Per-run record list plus a config echo and summary metrics.

    Records are indexed contiguously from 0 at the recording stride, with a
    final row at k = K describing the last iterate; a diverged run is
    truncated at the offending iteration instead.
    """

    records: list[TraceRecord]
    problem_name: str
    solver: str
    sampler: str
    plan: str
    seed: int
    K: int
    init_mode: str
    record_every: int
    oracle_calls: int
    diverged: bool = False
    diverged_at: int | None = None
    min_op_norm_sq: float = math.nan
    min_op_norm_k: int | None = None
    f0_sq: float = math.nan
    x_final: np.ndarray | None = None
    notes: tuple[str, ...] = ()
    x_history: list[np.ndarray] | None = None
    xhat_history: list[np.ndarray] | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]


def default_stride(K: int) -> int:
    """Record every iteration up to 10^4 total, then thin to ~10^4 rows."""
    return 1 if K <= 10_000 else math.ceil(K / 10_000)


def _init_note(init_mode: str) -> str:
    if init_mode == "zero_cache":
        return (
            "init_mode=zero_cache: xhat_0 = x_0 via a zero cached value; the "
            "warm_start convention (extra estimator call at x_0) is available"
        )
    return (
        "init_mode=warm_start: one warm-up estimator call at x_0 seeds the "
        "cache; the zero_cache convention (xhat_0 = x_0) is available"
    )


def _metrics(x, xhat_prev, xstar):
    if xstar is None:
        return math.nan, math.nan
    d = x - xstar
    sq = float(d @ d)
    e = x - xhat_prev
    return sq, sq + float(e @ e)


def _diverged(x) -> bool:
    return not np.all(np.isfinite(x)) or float(x @ x) > DIVERGENCE_NORM**2


def speg_run(
    problem: FiniteSumProblem,
    spec: SamplerSpec,
    plan: StepSizePlan,
    K: int,
    x0,
    seed: int = 0,
    record_every: int | None = None,
    init_mode: str = "zero_cache",
    capture: bool = False,
    op_norm_metric: bool = True,
) -> Trace:
    """Run K past-extragradient iterations and return the trace.

    Exactly one estimator evaluation per iteration (plus the optional
    warm-up); a non-finite or >1e12-norm iterate truncates the run with the
    divergence flag set rather than raising.
    """
    if K < 1:
        raise VibenchError("K must be at least 1")
    if spec.n != problem.n_components:
        raise VibenchError(f"sampler is over {spec.n} components, problem has {problem.n_components}")
    if init_mode not in ("zero_cache", "warm_start"):
        raise VibenchError(f"unknown init_mode {init_mode!r}")
    rng = np.random.default_rng(seed)
    x = as_point(x0, problem.dimension).copy()
    xstar = problem.known_solution
    stride = default_stride(K) if record_every is None else max(1, int(record_every))

    if op_norm_metric:
        f0 = evaluate_full(problem, x)
        f0_sq = float(f0 @ f0)
    else:
        f0_sq = math.nan

    calls = 0
    if init_mode == "warm_start":
        v = draw(spec, rng)
        cached = apply_estimator(problem, v, x)
        calls += int(v.support.size)
    else:
        cached = np.zeros_like(x)
    xhat_prev = x.copy()

    records: list[TraceRecord] = []
    x_hist = [x.copy()] if capture else None
    xhat_hist = [] if capture else None
    min_op = math.inf
    min_op_k = None
    diverged = False
    diverged_at = None

    def emit(k, gamma, omega, x_k, xhat_prev_k, xhat_k):
        nonlocal min_op, min_op_k
        sq, rm = _metrics(x_k, xhat_prev_k, xstar)
        if op_norm_metric:
            f = evaluate_full(problem, xhat_k)
            op = float(f @ f)
            if op < min_op:
                min_op, min_op_k = op, k
        else:
            op = math.nan
        records.append(TraceRecord(k, gamma, omega, sq, rm, op, calls))

    k = 0
    for k in range(K):
        gamma, omega = plan.step(k)
        xhat = x - gamma * cached
        if _diverged(xhat):
            diverged, diverged_at = True, k
            break
        v = draw(spec, rng)
        u = apply_estimator(problem, v, xhat)
        calls += int(v.support.size)
        if capture:
            xhat_hist.append(xhat.copy())
        if k % stride == 0:
            emit(k, gamma, omega, x, xhat_prev, xhat)
        x_next = x - omega * u
        if _diverged(x_next):
            diverged, diverged_at = True, k
            break
        x = x_next
        cached = u
        xhat_prev = xhat
        if capture:
            x_hist.append(x.copy())
    if not diverged:
        gamma, omega = plan.step(K)
        xhat = x - gamma * cached
        if capture:
            xhat_hist.append(xhat.copy())
        emit(K, gamma, omega, x, xhat_prev, xhat)

    return Trace(
        records=records,
        problem_name=problem.name,
        solver="speg",
        sampler=spec.describe(),
        plan=plan.describe(),
        seed=seed,
        K=K,
        init_mode=init_mode,
        record_every=stride,
        oracle_calls=calls,
        diverged=diverged,
        diverged_at=diverged_at,
        min_op_norm_sq=min_op if min_op < math.inf else math.nan,
        min_op_norm_k=min_op_k,
        f0_sq=f0_sq,
        x_final=x.copy(),
        notes=(_init_note(init_mode),),
        x_history=x_hist,
        xhat_history=xhat_hist,
    )


def sog_run(
    problem: FiniteSumProblem,
    spec: SamplerSpec,
    plan: StepSizePlan,
    K: int,
    x0,
    seed: int = 0,
    record_every: int | None = None,
    init_mode: str = "zero_cache",
    capture: bool = False,
    op_norm_metric: bool = True,
) -> Trace:
    """Run the optimistic-gradient recursion (constant-step plans only).

    With the same seed and spec, iterate k equals the past-extragradient
    run's xhat_k.  ``r_metric`` here uses the previous iterate in place of
    the extrapolation pair: ||y_k - x*||^2 + ||y_k - y_{k-1}||^2.
    """
    if not plan.is_constant:
        raise ScheduleError("equivalence requires constant steps")
    if K < 1:
        raise VibenchError("K must be at least 1")
    if spec.n != problem.n_components:
        raise VibenchError(f"sampler is over {spec.n} components, problem has {problem.n_components}")
    gamma, omega = plan.step(0)
    rng = np.random.default_rng(seed)
    x0 = as_point(x0, problem.dimension).copy()
    xstar = problem.known_solution
    stride = default_stride(K) if record_every is None else max(1, int(record_every))

    if op_norm_metric:
        f0 = evaluate_full(problem, x0)
        f0_sq = float(f0 @ f0)
    else:
        f0_sq = math.nan

    calls = 0
    if init_mode == "warm_start":
        v = draw(spec, rng)
        prev = apply_estimator(problem, v, x0)
        calls += int(v.support.size)
        y = x0 - gamma * prev
    elif init_mode == "zero_cache":
        prev = np.zeros_like(x0)
        y = x0
    else:
        raise VibenchError(f"unknown init_mode {init_mode!r}")
    y_prev = y.copy()

    records: list[TraceRecord] = []
    y_hist = [y.copy()] if capture else None
    min_op = math.inf
    min_op_k = None
    diverged = False
    diverged_at = None

    def emit(k, y_k, y_prev_k):
        nonlocal min_op, min_op_k
        sq, rm = _metrics(y_k, y_prev_k, xstar)
        if op_norm_metric:
            f = evaluate_full(problem, y_k)
            op = float(f @ f)
            if op < min_op:
                min_op, min_op_k = op, k
        else:
            op = math.nan
        records.append(TraceRecord(k, gamma, omega, sq, rm, op, calls))

    for k in range(K):
        v = draw(spec, rng)
        u = apply_estimator(problem, v, y)
        calls += int(v.support.size)
        if k % stride == 0:
            emit(k, y, y_prev)
        y_next = y - omega * u - gamma * (u - prev)
        if _diverged(y_next):
            diverged, diverged_at = True, k
            break
        y_prev = y
        y = y_next
        prev = u
        if capture:
            y_hist.append(y.copy())
    if not diverged:
        emit(K, y, y_prev)

    return Trace(
        records=records,
        problem_name=problem.name,
        solver="sog",
        sampler=spec.describe(),
        plan=plan.describe(),
        seed=seed,
        K=K,
        init_mode=init_mode,
        record_every=stride,
        oracle_calls=calls,
        diverged=diverged,
        diverged_at=diverged_at,
        min_op_norm_sq=min_op if min_op < math.inf else math.nan,
        min_op_norm_k=min_op_k,
        f0_sq=f0_sq,
        x_final=y.copy(),
        notes=(_init_note(init_mode),),
        x_history=y_hist,
        xhat_history=None,
    )


def peg_run(
    problem: FiniteSumProblem,
    plan: StepSizePlan,
    K: int,
    x0,
    record_every: int | None = None,
    capture: bool = False,
    op_norm_metric: bool = True,
) -> Trace:
    """Deterministic past-extragradient: full-batch estimator, no RNG consumed."""
    spec = SamplerSpec.full_batch(problem.n_components)
    trace = speg_run(
        problem,
        spec,
        plan,
        K,
        x0,
        seed=0,
        record_every=record_every,
        capture=capture,
        op_norm_metric=op_norm_metric,
    )
    trace.solver = "peg"
    return trace


def _affine_stack(problem: FiniteSumProblem):
    if not problem.is_affine:
        return None
    ms = np.stack([c.matrix for c in problem.components])
    bs = np.stack([c.offset for c in problem.components])
    return ms, bs


def weak_mvi_speg_run(
    problem: FiniteSumProblem,
    batch: int,
    gamma: float,
    omega: float,
    K: int,
    x0,
    seed: int = 0,
    record_every: int | None = None,
    force: bool = False,
    capture: bool = False,
) -> Trace:
    """Past-extragradient with separated steps and an averaged estimator.

    Each iteration averages ``batch`` independent uniform single-element
    draws (equivalently multinomial component counts), which divides the
    estimator's noise constants by the batch size.  (gamma, omega) are
    validated against the weak-Minty step constraints using the problem's
    certified (L, rho) unless ``force`` is set.  The trace carries the running
    minimum of the full-operator norm over all iterations, evaluated at every
    extrapolation point.
    """
    if K < 2:
        raise VibenchError("K must be at least 2")
    if batch < 1:
        raise VibenchError("batch must be at least 1")
    if not force:
        c = problem.constants
        if c is None or c.rho is None:
            raise VibenchError(
                "problem lacks certified (L, rho) for step validation; pass force=True to skip"
            )
        validate_weak_mvi_steps(c.L, c.rho, gamma, omega)

    rng = np.random.default_rng(seed)
    x = as_point(x0, problem.dimension).copy()
    xstar = problem.known_solution
    n = problem.n_components
    stride = default_stride(K) if record_every is None else max(1, int(record_every))
    stack = _affine_stack(problem)

    def estimator(z: np.ndarray) -> np.ndarray:
        # batch iid uniform single-element draws, averaged:
        # (1/(n*batch)) sum_j (1/p) F_{i_j}(z) with p = 1/n
        idx = rng.integers(0, n, size=batch)
        if stack is not None:
            ms, bs = stack
            return (ms[idx] @ z + bs[idx]).mean(axis=0)
        acc = np.zeros_like(z)
        for i in idx:
            acc += problem.components[i](z)
        return acc / batch

    f0 = evaluate_full(problem, x)
    f0_sq = float(f0 @ f0)
    cached = np.zeros_like(x)  # the analysis convention: xhat_0 = x_0
    xhat_prev = x.copy()
    calls = 0
    records: list[TraceRecord] = []
    x_hist = [x.copy()] if capture else None
    xhat_hist = [] if capture else None
    min_op = math.inf
    min_op_k = None
    diverged = False
    diverged_at = None

    for k in range(K):
        xhat = x - gamma * cached
        if _diverged(xhat):
            diverged, diverged_at = True, k
            break
        f = evaluate_full(problem, xhat)
        op = float(f @ f)
        if op < min_op:
            min_op, min_op_k = op, k
        u = estimator(xhat)
        calls += batch
        if capture:
            xhat_hist.append(xhat.copy())
        if k % stride == 0:
            sq, rm = _metrics(x, xhat_prev, xstar)
            records.append(TraceRecord(k, gamma, omega, sq, rm, op, calls))
        x_next = x - omega * u
        if _diverged(x_next):
            diverged, diverged_at = True, k
            break
        x = x_next
        cached = u
        xhat_prev = xhat
        if capture:
            x_hist.append(x.copy())
    if not diverged:
        xhat = x - gamma * cached
        f = evaluate_full(problem, xhat)
        sq, rm = _metrics(x, xhat_prev, xstar)
        records.append(TraceRecord(K, gamma, omega, sq, rm, float(f @ f), calls))
        if capture:
            xhat_hist.append(xhat.copy())

    return Trace(
        records=records,
        problem_name=problem.name,
        solver="weak_mvi_speg",
        sampler=f"averaged_single_element(batch={batch}, n={n})",
        plan=f"weak_mvi(gamma={gamma:.6g}, omega={omega:.6g})",
        seed=seed,
        K=K,
        init_mode="zero_cache",
        record_every=stride,
        oracle_calls=calls,
        diverged=diverged,
        diverged_at=diverged_at,
        min_op_norm_sq=min_op if min_op < math.inf else math.nan,
        min_op_norm_k=min_op_k,
        f0_sq=f0_sq,
        x_final=x.copy(),
        notes=(_init_note("zero_cache"),),
        x_history=x_hist,
        xhat_history=xhat_hist,
    )
