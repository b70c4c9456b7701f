"""Sampling vectors and estimator noise constants.

The stochastic estimator of the averaged operator is
g(x) = (1/n) sum_i v_i F_i(x) for a random nonnegative weight vector v with
E[v_i] = 1 per coordinate.  Two families are provided: uniform tau-subset
sampling (weight n/tau on each selected index) and single-element sampling
(index i with probability p_i, weight 1/p_i), plus the deterministic
full-batch vector.  Vectors are kept sparse as (support, weights) pairs.

The closed-form noise constants (delta, sigma_star_sq) quantify how far the
estimator strays from the mean operator; they feed directly into the step-size
rules in :mod:`vibench.schedules`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FiniteSumProblem,
    NoiseConstants,
    VibenchError,
    as_point,
    component_star_norms_sq,
    evaluate_full,
)

__all__ = [
    "SamplingVector",
    "SamplerSpec",
    "draw",
    "apply_estimator",
    "minibatch_noise_constants",
    "single_element_noise_constants",
    "importance_probabilities",
    "importance_delta",
    "uniform_single_element_delta",
    "noise_constants_for",
    "MonteCarloEstimate",
    "estimate_sigma_star",
]


@dataclass(frozen=True, eq=False)
class SamplingVector:
    """Sparse realization of a sampling vector: positive weights on a support."""

    support: np.ndarray
    weights: np.ndarray
    n: int

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.intp)
        w = np.asarray(self.weights, dtype=np.float64)
        if sup.shape != w.shape or sup.ndim != 1:
            raise VibenchError("support and weights must be 1-D arrays of equal length")
        if np.any(w <= 0):
            raise VibenchError("sampling weights must be strictly positive")
        if np.unique(sup).size != sup.size:
            raise VibenchError("support indices must be unique")
        if sup.size and (sup.min() < 0 or sup.max() >= self.n):
            raise VibenchError("support indices out of range")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", w)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.n)
        dense[self.support] = self.weights
        return dense

    @classmethod
    def _trusted(cls, support: np.ndarray, weights: np.ndarray, n: int) -> "SamplingVector":
        # used by draw(), which constructs valid arrays; skips re-validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "support", support)
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "n", n)
        return obj


@dataclass(frozen=True, eq=False)
class SamplerSpec:
    """Distribution over sampling vectors; validated at construction.

    ``kind`` is one of ``minibatch`` (uniform tau-subset), ``single_element``
    (probabilities ``probs``), or ``full_batch``.  Specs are immutable and
    shareable; each draw consumes the caller's RNG stream.
    """

    kind: str
    n: int
    tau: int | None = None
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise VibenchError("n must be at least 1")
        if self.kind == "minibatch":
            if self.tau is None or not (1 <= self.tau <= self.n):
                raise VibenchError(f"minibatch size tau={self.tau} out of range [1, {self.n}]")
        elif self.kind == "single_element":
            p = np.asarray(self.probs, dtype=np.float64)
            if p.shape != (self.n,):
                raise VibenchError(f"probs must have length {self.n}")
            if np.any(p <= 0):
                raise VibenchError("single-element probabilities must be strictly positive")
            if abs(float(p.sum()) - 1.0) > 1e-12:
                raise VibenchError(f"probabilities sum to {p.sum()!r}, not 1")
            object.__setattr__(self, "probs", p)
            object.__setattr__(self, "_cum", np.cumsum(p))
        elif self.kind == "full_batch":
            pass
        else:
            raise VibenchError(f"unknown sampler kind {self.kind!r}")

    @classmethod
    def minibatch(cls, n: int, tau: int) -> "SamplerSpec":
        return cls(kind="minibatch", n=n, tau=tau)

    @classmethod
    def single_element(cls, probs) -> "SamplerSpec":
        p = np.asarray(probs, dtype=np.float64)
        return cls(kind="single_element", n=p.shape[0], probs=p)

    @classmethod
    def full_batch(cls, n: int) -> "SamplerSpec":
        return cls(kind="full_batch", n=n)

    def describe(self) -> str:
        if self.kind == "minibatch":
            return f"minibatch(tau={self.tau}, n={self.n})"
        if self.kind == "single_element":
            return f"single_element(n={self.n})"
        return f"full_batch(n={self.n})"


def _random_subset(n: int, tau: int, rng) -> np.ndarray:
    # sparse partial Fisher-Yates over range(n): O(tau) time and space
    swaps: dict[int, int] = {}
    out = np.empty(tau, dtype=np.intp)
    for i in range(tau):
        j = int(rng.integers(i, n))
        out[i] = swaps.get(j, j)
        swaps[j] = swaps.get(i, i)
    return out


def draw(spec: SamplerSpec, rng) -> SamplingVector:
    """Draw one sampling vector from ``spec`` using the caller-owned ``rng``."""
    if spec.kind == "full_batch":
        return SamplingVector._trusted(np.arange(spec.n), np.ones(spec.n), spec.n)
    if spec.kind == "minibatch":
        sup = _random_subset(spec.n, spec.tau, rng)
        return SamplingVector._trusted(sup, np.full(spec.tau, spec.n / spec.tau), spec.n)
    i = int(np.searchsorted(spec._cum, rng.random(), side="right"))
    i = min(i, spec.n - 1)
    return SamplingVector._trusted(
        np.array([i], dtype=np.intp), np.array([1.0 / spec.probs[i]]), spec.n
    )


def apply_estimator(problem: FiniteSumProblem, v: SamplingVector, x: np.ndarray) -> np.ndarray:
    """Evaluate g(x) = (1/n) sum_{i in support} v_i F_i(x).

    Reduces to :func:`vibench.core.evaluate_full` bitwise for the full-batch
    vector on affine problems only up to summation order; exact equality is
    guaranteed when weights are all 1 and the problem evaluates by summation.
    """
    x = as_point(x, problem.dimension)
    if v.n != problem.n_components:
        raise VibenchError(
            f"sampling vector is over {v.n} components, problem has {problem.n_components}"
        )
    n = problem.n_components
    if v.support.size == n and np.all(v.weights == 1.0):
        return evaluate_full(problem, x)
    acc = np.zeros(problem.dimension)
    for idx, w in zip(v.support, v.weights):
        acc += w * problem.components[idx](x)
    return acc / n


def _minibatch_factor(n: int, tau: int) -> float:
    # (n - tau)/(n - 1), with the n = 1 degenerate case defined as 0
    if n == 1 or tau == n:
        return 0.0
    return (n - tau) / (n - 1)


def minibatch_noise_constants(lipschitz_bounds, star_norms_sq, tau: int) -> NoiseConstants:
    """Closed-form (delta, sigma_star_sq) for uniform tau-subset sampling.

    delta = (2/(n tau)) ((n-tau)/(n-1)) sum_i L_i^2 and
    sigma_star_sq = (1/(n tau)) ((n-tau)/(n-1)) sum_i ||F_i(x*)||^2; both are
    exactly 0 for tau = n (or n = 1, which forces tau = 1).
    """
    l_sq = np.asarray(lipschitz_bounds, dtype=np.float64) ** 2
    s = np.asarray(star_norms_sq, dtype=np.float64)
    n = l_sq.shape[0]
    if n < 1:
        raise VibenchError("need at least one component")
    if s.shape[0] != n:
        raise VibenchError("lipschitz_bounds and star_norms_sq must have equal length")
    if not (1 <= tau <= n):
        raise VibenchError(f"tau={tau} out of range [1, {n}]")
    factor = _minibatch_factor(n, tau) / (n * tau)
    return NoiseConstants(
        delta=float(2.0 * factor * l_sq.sum()),
        sigma_star_sq=float(factor * s.sum()),
        provenance="closed_form",
    )


def single_element_noise_constants(lipschitz_bounds, star_norms_sq, probs) -> NoiseConstants:
    """Closed-form (delta, sigma_star_sq) for single-element sampling:
    delta = (2/n^2) sum_i L_i^2 / p_i and
    sigma_star_sq = (1/n^2) sum_i ||F_i(x*)||^2 / p_i.
    """
    l_sq = np.asarray(lipschitz_bounds, dtype=np.float64) ** 2
    s = np.asarray(star_norms_sq, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    n = l_sq.shape[0]
    if s.shape[0] != n or p.shape[0] != n:
        raise VibenchError("lipschitz_bounds, star_norms_sq and probs must have equal length")
    if np.any(p <= 0):
        raise VibenchError("probabilities must be strictly positive")
    return NoiseConstants(
        delta=float(2.0 / n**2 * np.sum(l_sq / p)),
        sigma_star_sq=float(1.0 / n**2 * np.sum(s / p)),
        provenance="closed_form",
    )


def importance_probabilities(lipschitz_bounds) -> np.ndarray:
    """Probabilities p_i = L_i / sum_j L_j minimizing the single-element delta.

    All L_i must be strictly positive; a zero bound would zero out that
    component's probability mass, so the caller must perturb or drop it.
    """
    l = np.asarray(lipschitz_bounds, dtype=np.float64)
    if np.any(l <= 0):
        raise VibenchError("importance sampling requires strictly positive Lipschitz bounds")
    return l / l.sum()


def importance_delta(lipschitz_bounds) -> float:
    """delta under importance probabilities: (2/n^2) (sum_i L_i)^2."""
    l = np.asarray(lipschitz_bounds, dtype=np.float64)
    return float(2.0 / l.shape[0] ** 2 * l.sum() ** 2)


def uniform_single_element_delta(lipschitz_bounds) -> float:
    """delta under uniform single-element sampling: (2/n) sum_i L_i^2."""
    l = np.asarray(lipschitz_bounds, dtype=np.float64)
    return float(2.0 / l.shape[0] * np.sum(l**2))


def noise_constants_for(
    problem: FiniteSumProblem, spec: SamplerSpec, lipschitz_bounds=None
) -> NoiseConstants:
    """Closed-form noise constants of ``spec`` on ``problem``.

    Component Lipschitz bounds default to the certified ``constants.L_i_list``;
    star norms require a known solution (they are 0 without one only for
    full-batch sampling).
    """
    if spec.kind == "full_batch":
        return NoiseConstants(0.0, 0.0, provenance="closed_form")
    if lipschitz_bounds is None:
        if problem.constants is None:
            raise VibenchError("problem has no certified constants; pass lipschitz_bounds")
        lipschitz_bounds = problem.constants.L_i_list
    star = component_star_norms_sq(problem)
    if spec.kind == "minibatch":
        return minibatch_noise_constants(lipschitz_bounds, star, spec.tau)
    return single_element_noise_constants(lipschitz_bounds, star, spec.probs)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    samples: int


def estimate_sigma_star(
    problem: FiniteSumProblem, spec: SamplerSpec, samples: int, rng
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of sigma_star_sq = E||g(x*)||^2 with its standard error."""
    if problem.known_solution is None:
        raise VibenchError("sigma_star estimation requires a known solution")
    if samples < 1:
        raise VibenchError("need at least one sample")
    xs = problem.known_solution
    vals = np.empty(samples)
    for i in range(samples):
        g = apply_estimator(problem, draw(spec, rng), xs)
        vals[i] = g @ g
    se = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return MonteCarloEstimate(value=float(vals.mean()), std_error=se, samples=samples)
