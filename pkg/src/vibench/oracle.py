"""Independent brute-force and analytic verifiers.

Everything here recomputes estimator statistics from first principles so the
closed forms in :mod:`vibench.sampling` can be cross-checked: exact
expectations over all C(n, tau) subsets, the pairwise-inclusion expansion of
second moments, the enumerated covariance of the sampling vector, and
condition checkers that report worst-case margins with a witness point.

Exact subset enumeration refuses n > 12 rather than silently sampling.
Reductions run in a fixed (lexicographic) order for bit-reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import FiniteSumProblem, VibenchError, as_point, component_values, evaluate_full
from .sampling import SamplerSpec

__all__ = [
    "ConditionReport",
    "second_moment_weights",
    "exact_second_moment",
    "exact_variance",
    "exact_shifted_second_moment",
    "exact_residual",
    "enumerate_minibatch_residual",
    "enumerate_sigma_star",
    "enumerate_covariance",
    "check_quasi_strong",
    "check_weak_mvi",
    "check_hierarchy",
]

ENUMERATION_LIMIT = 12


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition check over a finite point set."""

    condition: str
    margin: float
    witness: np.ndarray | None
    passed: bool
    constants: dict = field(default_factory=dict)
    growth_exponent: float | None = None
    details: str = ""

    def __str__(self):
        state = "pass" if self.passed else "FAIL"
        extra = f" ({self.details})" if self.details else ""
        return f"{self.condition}: {state}, worst margin {self.margin:.3e}{extra}"


def _guard(n: int):
    if n > ENUMERATION_LIMIT:
        raise VibenchError(f"exact enumeration refuses n={n} > {ENUMERATION_LIMIT}")


def second_moment_weights(spec: SamplerSpec) -> np.ndarray:
    """Pairwise weights W_ij = P(i, j selected) / (p_i p_j).

    E||g(x)||^2 = (1/n^2) sum_ij W_ij <F_i(x), F_j(x)> for subset-style
    samplings; diagonal entries use P(i in S) itself.
    """
    n = spec.n
    if spec.kind == "full_batch":
        return np.ones((n, n))
    if spec.kind == "minibatch":
        tau = spec.tau
        off = 0.0 if n == 1 else n * (tau - 1) / (tau * (n - 1))
        w = np.full((n, n), off)
        np.fill_diagonal(w, n / tau)
        return w
    return np.diag(1.0 / spec.probs)


def _weighted_gram(weights: np.ndarray, vals: np.ndarray) -> float:
    gram = vals @ vals.T
    n = vals.shape[0]
    # a second moment; cancellation can leave a tiny negative residue
    return max(0.0, float(np.sum(weights * gram)) / n**2)


def exact_second_moment(problem: FiniteSumProblem, spec: SamplerSpec, x) -> float:
    """Exact E||g(x)||^2 via the pairwise-inclusion expansion."""
    return _weighted_gram(second_moment_weights(spec), component_values(problem, x))


def exact_variance(problem: FiniteSumProblem, spec: SamplerSpec, x) -> float:
    """Exact E||g(x) - F(x)||^2 (second moment minus squared mean)."""
    f = evaluate_full(problem, x)
    return exact_second_moment(problem, spec, x) - float(f @ f)


def exact_shifted_second_moment(problem: FiniteSumProblem, spec: SamplerSpec, x) -> float:
    """Exact E||g(x) - g(x*)||^2."""
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    diffs = component_values(problem, x) - component_values(problem, problem.known_solution)
    return _weighted_gram(second_moment_weights(spec), diffs)


def exact_residual(problem: FiniteSumProblem, spec: SamplerSpec, x) -> float:
    """Exact E||(g(x) - g(x*)) - (F(x) - F(x*))||^2 via the expansion."""
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    x = as_point(x, problem.dimension)
    diffs = component_values(problem, x) - component_values(problem, problem.known_solution)
    mean_diff = diffs.mean(axis=0)
    value = _weighted_gram(second_moment_weights(spec), diffs) - float(mean_diff @ mean_diff)
    return max(0.0, value)


def enumerate_minibatch_residual(problem: FiniteSumProblem, tau: int, x) -> float:
    """Exact residual for tau-subset sampling by averaging over all C(n, tau)
    subsets with weight n/tau; requires a known solution and n <= 12."""
    n = problem.n_components
    _guard(n)
    if not (1 <= tau <= n):
        raise VibenchError(f"tau={tau} out of range [1, {n}]")
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    x = as_point(x, problem.dimension)
    diffs = component_values(problem, x) - component_values(problem, problem.known_solution)
    mean_diff = diffs.mean(axis=0)
    total = 0.0
    count = 0
    for subset in combinations(range(n), tau):
        dev = diffs[list(subset)].sum(axis=0) / tau - mean_diff
        total += float(dev @ dev)
        count += 1
    return total / count


def enumerate_sigma_star(problem: FiniteSumProblem, spec: SamplerSpec) -> float:
    """Exact E||g(x*)||^2 from the pairwise-inclusion expansion; n <= 12."""
    _guard(problem.n_components)
    if spec.kind not in ("minibatch", "single_element"):
        raise VibenchError("enumeration covers minibatch and single_element samplings")
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    return exact_second_moment(problem, spec, problem.known_solution)


def enumerate_covariance(spec: SamplerSpec) -> np.ndarray:
    """Brute-force covariance matrix of the sampling vector v.

    For tau-subset sampling this enumerates every outcome (n <= 12); it is
    the independent path to the variance-eigenvalue factor behind the closed
    form for delta.
    """
    n = spec.n
    if spec.kind == "full_batch":
        return np.zeros((n, n))
    if spec.kind == "single_element":
        return np.diag(1.0 / spec.probs) - np.ones((n, n))
    _guard(n)
    second = np.zeros((n, n))
    count = 0
    w = n / spec.tau
    for subset in combinations(range(n), spec.tau):
        v = np.zeros(n)
        v[list(subset)] = w
        second += np.outer(v, v)
        count += 1
    return second / count - np.ones((n, n))


def _inner_margins(problem, points, term_fn):
    worst = math.inf
    witness = None
    for x in points:
        x = as_point(x, problem.dimension)
        m = term_fn(x)
        if m < worst:
            worst, witness = m, x
    return worst, witness


def check_quasi_strong(
    problem: FiniteSumProblem, mu: float, points, tolerance: float = 1e-9
) -> ConditionReport:
    """Worst margin of <F(x), x - x*> - mu ||x - x*||^2 over the points."""
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    xs = problem.known_solution

    def term(x):
        fx = evaluate_full(problem, x)
        d = x - xs
        return float(fx @ d) - mu * float(d @ d)

    worst, witness = _inner_margins(problem, points, term)
    return ConditionReport(
        condition="quasi_strong_monotonicity",
        margin=worst,
        witness=witness,
        passed=worst >= -tolerance,
        constants={"mu": mu},
    )


def check_weak_mvi(
    problem: FiniteSumProblem, rho: float, points, tolerance: float = 1e-9
) -> ConditionReport:
    """Worst margin of <F(x), x - x*> + rho ||F(x)||^2 over the points."""
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    xs = problem.known_solution

    def term(x):
        fx = evaluate_full(problem, x)
        return float(fx @ (x - xs)) + rho * float(fx @ fx)

    worst, witness = _inner_margins(problem, points, term)
    return ConditionReport(
        condition="weak_minty",
        margin=worst,
        witness=witness,
        passed=worst >= -tolerance,
        constants={"rho": rho},
    )


def _growth_exponent(radii, values):
    mask = (radii > 1e-12) & (values > 1e-300)
    if mask.sum() < 2:
        return 0.0
    lr = np.log(radii[mask])
    lv = np.log(values[mask])
    if np.ptp(lr) < 1e-12:
        return 0.0
    slope, _ = np.polyfit(lr, lv, 1)
    return float(slope)


def check_hierarchy(
    problem: FiniteSumProblem,
    spec: SamplerSpec,
    points,
    tolerance: float = 1e-9,
    noise=None,
) -> list[ConditionReport]:
    """Fit/verify the noise-condition ladder on a finite point set.

    Reports, in order: bounded operator, bounded variance, growth condition,
    expected cocoercivity, expected residual, and the second-moment bound
    E||g||^2 <= delta r^2 + ||F||^2 + 2 sigma*^2.  Fitted constants are the
    smallest making each condition hold on the sample; conditions whose
    fitted constant grows with the distance from the solution are reported
    unbounded instead of passed.  ``noise`` supplies closed-form
    (delta, sigma_star_sq); when omitted it is derived from the problem's
    certified constants where possible.
    """
    if problem.known_solution is None:
        raise VibenchError("needs a known solution")
    xs = problem.known_solution
    pts = [as_point(p, problem.dimension) for p in points]
    if not pts:
        raise VibenchError("needs at least one point")

    if noise is None and problem.constants is not None and spec.kind != "full_batch":
        from .sampling import noise_constants_for

        noise = noise_constants_for(problem, spec)

    radii = np.array([float(np.linalg.norm(p - xs)) for p in pts])
    second = np.array([exact_second_moment(problem, spec, p) for p in pts])
    f_vals = [evaluate_full(problem, p) for p in pts]
    f_sq = np.array([float(f @ f) for f in f_vals])
    inner = np.array([float(f @ (p - xs)) for f, p in zip(f_vals, pts)])
    variance = second - f_sq
    shifted = np.array([exact_shifted_second_moment(problem, spec, p) for p in pts])
    residual = np.array([exact_residual(problem, spec, p) for p in pts])
    sigma_star_exact = exact_second_moment(problem, spec, xs)

    reports: list[ConditionReport] = []

    # 1. bounded operator: E||g||^2 <= c
    exp_op = _growth_exponent(radii, second)
    c_op = float(second.max())
    i_w = int(second.argmax())
    reports.append(
        ConditionReport(
            condition="bounded_operator",
            margin=0.0,
            witness=pts[i_w],
            passed=exp_op <= 0.5,
            constants={"c": c_op},
            growth_exponent=exp_op,
            details="unbounded on sample" if exp_op > 0.5 else "",
        )
    )

    # 2. bounded variance: E||g - F||^2 <= sigma^2
    exp_var = _growth_exponent(radii, np.maximum(variance, 0.0))
    c_var = float(variance.max())
    i_w = int(variance.argmax())
    reports.append(
        ConditionReport(
            condition="bounded_variance",
            margin=0.0,
            witness=pts[i_w],
            passed=exp_var <= 0.5,
            constants={"sigma_sq": c_var},
            growth_exponent=exp_var,
            details="unbounded on sample" if exp_var > 0.5 else "",
        )
    )

    # 3. growth condition: E||g||^2 <= alpha ||F||^2 + beta (least squares, then lift beta)
    a = np.stack([f_sq, np.ones_like(f_sq)], axis=1)
    coef, *_ = np.linalg.lstsq(a, second, rcond=None)
    alpha = max(0.0, float(coef[0]))
    beta = max(0.0, float(coef[1]))
    slack = second - alpha * f_sq - beta
    beta += max(0.0, float(slack.max()))
    reports.append(
        ConditionReport(
            condition="growth_condition",
            margin=float((alpha * f_sq + beta - second).min()),
            witness=pts[int(slack.argmax())],
            passed=True,
            constants={"alpha": alpha, "beta": beta},
        )
    )

    # 4. expected cocoercivity: E||g(x) - g(x*)||^2 <= l_F <F(x), x - x*>
    #    (l_F reported descriptively from the sampled ratio)
    pos = inner > tolerance
    if np.all(pos | (shifted <= tolerance)):
        ratios = shifted[pos] / inner[pos]
        l_f = float(ratios.max()) if ratios.size else 0.0
        reports.append(
            ConditionReport(
                condition="expected_cocoercivity",
                margin=0.0,
                witness=pts[int(np.argmax(shifted))],
                passed=True,
                constants={"l_F": l_f},
                details="sampled ratio only",
            )
        )
    else:
        bad = int(np.argmin(np.where(pos, np.inf, inner)))
        reports.append(
            ConditionReport(
                condition="expected_cocoercivity",
                margin=float(inner.min()),
                witness=pts[bad],
                passed=False,
                details="nonpositive <F(x), x - x*> with nonzero shifted moment",
            )
        )

    # 5. expected residual: E||(g - g*) - (F - F*)||^2 <= (delta/2) r^2
    r_pos = radii > 1e-12
    fitted_delta = float((2.0 * residual[r_pos] / radii[r_pos] ** 2).max()) if r_pos.any() else 0.0
    constants = {"delta_fitted": fitted_delta}
    if noise is not None:
        er_margin = float(((noise.delta / 2.0) * radii**2 - residual).min())
        er_pass = er_margin >= -tolerance
        constants["delta_closed_form"] = noise.delta
        i_w = int(np.argmin((noise.delta / 2.0) * radii**2 - residual))
    else:
        er_margin = 0.0
        er_pass = True
        i_w = int(np.argmax(residual))
    reports.append(
        ConditionReport(
            condition="expected_residual",
            margin=er_margin,
            witness=pts[i_w],
            passed=er_pass,
            constants=constants,
        )
    )

    # 6. second-moment bound: E||g||^2 <= delta r^2 + ||F||^2 + 2 sigma*^2
    delta_used = noise.delta if noise is not None else fitted_delta
    sigma_used = noise.sigma_star_sq if noise is not None else sigma_star_exact
    margins = delta_used * radii**2 + f_sq + 2.0 * sigma_used - second
    arrow = fitted_delta * radii**2 + f_sq + 2.0 * sigma_star_exact - second
    reports.append(
        ConditionReport(
            condition="variance_bound",
            margin=float(margins.min()),
            witness=pts[int(margins.argmin())],
            passed=float(margins.min()) >= -tolerance,
            constants={"delta": delta_used, "sigma_star_sq": sigma_used},
            details=(
                "fitted residual constants also satisfy it"
                if float(arrow.min()) >= -tolerance
                else "fitted residual constants violate it"
            ),
        )
    )
    return reports
