"""Domain types for finite-sum operator problems.

A problem is a collection of component operators F_1, ..., F_n mapping R^d to
R^d; the target is a root of the averaged operator F = (1/n) sum_i F_i.
Points are plain 1-D float64 arrays, validated finite at the API boundary via
:func:`as_point`.  Affine components carry their matrix/offset explicitly so
that problem constants (Lipschitz and monotonicity moduli) can be certified
spectrally instead of by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "VibenchError",
    "DimensionMismatch",
    "CertificationError",
    "as_point",
    "ComponentOperator",
    "affine_operator",
    "ProblemConstants",
    "NoiseConstants",
    "FiniteSumProblem",
    "evaluate_full",
    "component_values",
    "component_star_norms_sq",
    "certify_constants",
]

DEFAULT_TOLERANCE = 1e-9


class VibenchError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(VibenchError):
    def __init__(self, expected: int, actual: int, what: str = "point"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has dimension {actual}, expected {expected}")


class CertificationError(VibenchError):
    """Raised when a requested constant cannot be certified."""


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-D float64 vector, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise VibenchError(f"point must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise VibenchError("point has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(dim, arr.shape[0])
    return arr


@dataclass(frozen=True, eq=False)
class ComponentOperator:
    """One summand F_i: R^d -> R^d of a finite-sum operator.

    ``matrix``/``offset`` hold the affine representation F_i(x) = M x + b when
    one is known; the spectral certification paths require it.  ``lipschitz_bound``
    is an upper bound on the operator's Lipschitz constant (exact for affine
    operators, where it equals the largest singular value of M).
    """

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz_bound: float | None = None
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=np.float64)
            if m.shape != (self.dim, self.dim):
                raise DimensionMismatch(self.dim, m.shape[0], "operator matrix")
            b = self.offset if self.offset is not None else np.zeros(self.dim)
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "offset", as_point(b, self.dim))
        elif self.evaluator is None:
            raise VibenchError("component needs an evaluator or an affine (matrix, offset) pair")
        if self.lipschitz_bound is not None and self.lipschitz_bound < 0:
            raise VibenchError("lipschitz_bound must be nonnegative")

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, x.shape[0])
        if self.matrix is not None:
            return self.matrix @ x + self.offset
        out = np.asarray(self.evaluator(x), dtype=np.float64)
        if out.shape != (self.dim,):
            raise DimensionMismatch(self.dim, out.shape[0] if out.ndim else 0, "operator output")
        return out


def affine_operator(matrix, offset=None) -> ComponentOperator:
    """Build a component F(x) = M x + b with its exact Lipschitz constant."""
    m = np.asarray(matrix, dtype=np.float64)
    lip = float(np.linalg.norm(m, 2))
    return ComponentOperator(dim=m.shape[0], matrix=m, offset=offset, lipschitz_bound=lip)


@dataclass(frozen=True)
class ProblemConstants:
    """Certified constants of a finite-sum problem.

    ``provenance`` maps field name -> one of ``closed_form``,
    ``numerically_certified``, ``user_supplied``.  ``mu`` is the
    quasi-strong monotonicity modulus through the solution (clamped at 0 and
    annotated in ``notes`` when the symmetrized spectrum dips negative);
    ``rho`` is the weak-Minty slack parameter.
    """

    L: float
    L_i_list: tuple[float, ...]
    mu: float | None = None
    rho: float | None = None
    provenance: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.L < 0 or any(li < 0 for li in self.L_i_list):
            raise VibenchError("Lipschitz constants must be nonnegative")
        if self.mu is not None:
            if self.mu < 0:
                raise VibenchError("mu must be nonnegative")
            if self.mu > self.L + 1e-7 * max(1.0, self.L):
                raise VibenchError(f"mu={self.mu} exceeds L={self.L}")
        if self.rho is not None and self.rho < 0:
            raise VibenchError("rho must be nonnegative")
        if self.L_i_list:
            avg = sum(self.L_i_list) / len(self.L_i_list)
            if self.L > avg + 1e-7 * max(1.0, avg):
                raise VibenchError(
                    f"L={self.L} exceeds the component average {avg} (triangle inequality)"
                )

    @property
    def quasi_strongly_monotone(self) -> bool:
        return self.mu is not None and self.mu > 0


@dataclass(frozen=True)
class NoiseConstants:
    """Estimator noise parameters: residual slope ``delta`` and noise at the
    solution ``sigma_star_sq`` = E||g(x*)||^2.

    ``provenance`` is one of ``closed_form``, ``enumerated``, ``monte_carlo``.
    Both vanish exactly for deterministic full-batch sampling.
    """

    delta: float
    sigma_star_sq: float
    provenance: str = "closed_form"
    std_error: float | None = None

    def __post_init__(self):
        if self.delta < 0 or self.sigma_star_sq < 0:
            raise VibenchError("noise constants must be nonnegative")
        if self.provenance not in ("closed_form", "enumerated", "monte_carlo"):
            raise VibenchError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True, eq=False)
class FiniteSumProblem:
    """n component operators over R^d with an optional known root of the mean.

    Immutable after construction and safe to share across threads.  When every
    component is affine the averaged matrix/offset are precomputed so that
    full-operator evaluations cost a single matvec.
    """

    components: tuple[ComponentOperator, ...]
    dimension: int
    known_solution: np.ndarray | None = None
    constants: ProblemConstants | None = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)
    solution_tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise VibenchError("a finite-sum problem needs at least one component")
        for c in comps:
            if c.dim != self.dimension:
                raise DimensionMismatch(self.dimension, c.dim, "component")
        object.__setattr__(self, "components", comps)
        if all(c.is_affine for c in comps):
            mbar = np.mean([c.matrix for c in comps], axis=0)
            bbar = np.mean([c.offset for c in comps], axis=0)
            object.__setattr__(self, "_mean_matrix", mbar)
            object.__setattr__(self, "_mean_offset", bbar)
        else:
            object.__setattr__(self, "_mean_matrix", None)
            object.__setattr__(self, "_mean_offset", None)
        if self.known_solution is not None:
            xs = as_point(self.known_solution, self.dimension)
            object.__setattr__(self, "known_solution", xs)
            residual = float(np.linalg.norm(evaluate_full(self, xs)))
            if residual > self.solution_tolerance:
                raise VibenchError(
                    f"known_solution residual {residual:.3e} exceeds "
                    f"tolerance {self.solution_tolerance:.1e}"
                )

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def is_affine(self) -> bool:
        return self._mean_matrix is not None

    @property
    def mean_matrix(self) -> np.ndarray | None:
        return self._mean_matrix

    @property
    def mean_offset(self) -> np.ndarray | None:
        return self._mean_offset


def evaluate_full(problem: FiniteSumProblem, x: np.ndarray) -> np.ndarray:
    """Evaluate the averaged operator F(x) = (1/n) sum_i F_i(x).

    Deterministic; uses the cached averaged matrix when every component is
    affine.  Raises :class:`DimensionMismatch` on inconsistent input.
    """
    x = as_point(x, problem.dimension)
    if problem._mean_matrix is not None:
        return problem._mean_matrix @ x + problem._mean_offset
    acc = np.zeros(problem.dimension)
    for c in problem.components:
        acc += c(x)
    return acc / problem.n_components


def component_values(problem: FiniteSumProblem, x: np.ndarray) -> np.ndarray:
    """Stack all component values F_i(x) into an (n, d) array."""
    x = as_point(x, problem.dimension)
    return np.stack([c(x) for c in problem.components])


def component_star_norms_sq(problem: FiniteSumProblem) -> np.ndarray:
    """Per-component squared norms ||F_i(x*)||^2 at the known solution."""
    if problem.known_solution is None:
        raise VibenchError("problem has no known solution")
    vals = component_values(problem, problem.known_solution)
    return np.einsum("id,id->i", vals, vals)


def _sample_points(rng, dim, count, center=None, scale=1.0):
    pts = rng.standard_normal((count, dim)) * scale
    if center is not None:
        pts += center
    return pts


def certify_constants(
    problem: FiniteSumProblem,
    sample_count: int = 1000,
    seed: int = 0,
    *,
    certify_mu: bool | None = None,
    certify_rho: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
    sample_scale: float = 10.0,
) -> ProblemConstants:
    """Certify problem constants, spectrally for affine problems and by
    sampling otherwise.

    Affine problems get closed-form values: L_i is the largest singular value
    of M_i, L that of the averaged matrix, and mu the smallest eigenvalue of
    the symmetrized averaged matrix, clamped at 0.  General operators get
    sampled lower bounds on L/L_i and a sampled mu, flagged
    ``numerically_certified``.  rho certification finds the smallest rho >= 0
    making the weak-Minty inequality hold on the sample (0 when the Minty
    condition already holds there).

    ``certify_mu=None`` certifies mu exactly when a known solution is present;
    requesting mu or rho explicitly without one raises
    :class:`CertificationError`.
    """
    if sample_count < 1:
        raise VibenchError("sample_count must be positive")
    has_solution = problem.known_solution is not None
    if certify_mu is None:
        certify_mu = has_solution
    elif certify_mu and not has_solution:
        raise CertificationError("mu certification requires a known solution")
    if certify_rho and not has_solution:
        raise CertificationError("rho certification requires a known solution")

    rng = np.random.default_rng(seed)
    provenance: dict[str, str] = {}
    notes: list[str] = []

    if problem.is_affine:
        l_i = tuple(float(np.linalg.norm(c.matrix, 2)) for c in problem.components)
        big_l = float(np.linalg.norm(problem.mean_matrix, 2))
        provenance["L"] = provenance["L_i_list"] = "closed_form"
        mu = None
        if certify_mu:
            sym = 0.5 * (problem.mean_matrix + problem.mean_matrix.T)
            lam_min = float(np.linalg.eigvalsh(sym)[0])
            mu = max(0.0, lam_min)
            provenance["mu"] = "closed_form"
            if lam_min < 0:
                notes.append(
                    f"not quasi-strongly monotone: symmetrized spectrum reaches {lam_min:.3e}"
                )
    else:
        center = problem.known_solution
        xs = _sample_points(rng, problem.dimension, sample_count, center, sample_scale)
        ys = _sample_points(rng, problem.dimension, sample_count, center, sample_scale)
        l_i_arr = np.zeros(problem.n_components)
        big_l = 0.0
        for x, y in zip(xs, ys):
            dx = float(np.linalg.norm(x - y))
            if dx == 0.0:
                continue
            fx = component_values(problem, x)
            fy = component_values(problem, y)
            if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(fy))):
                raise CertificationError("non-finite operator value during certification")
            ratios = np.linalg.norm(fx - fy, axis=1) / dx
            l_i_arr = np.maximum(l_i_arr, ratios)
            big_l = max(big_l, float(np.linalg.norm(np.mean(fx - fy, axis=0))) / dx)
        l_i = tuple(float(v) for v in l_i_arr)
        provenance["L"] = provenance["L_i_list"] = "numerically_certified"
        notes.append("L values are sampled lower bounds")
        mu = None
        if certify_mu:
            pts = _sample_points(rng, problem.dimension, sample_count, center, sample_scale)
            worst = np.inf
            for x in pts:
                r_sq = float(np.dot(x - center, x - center))
                if r_sq == 0.0:
                    continue
                fx = evaluate_full(problem, x)
                worst = min(worst, float(np.dot(fx, x - center)) / r_sq)
            mu = max(0.0, worst if np.isfinite(worst) else 0.0)
            provenance["mu"] = "numerically_certified"
            if worst < 0:
                notes.append(f"not quasi-strongly monotone on sample: ratio reaches {worst:.3e}")

    rho = None
    if certify_rho:
        pts = _sample_points(rng, problem.dimension, sample_count, problem.known_solution, sample_scale)
        rho = 0.0
        for x in pts:
            fx = evaluate_full(problem, x)
            if not np.all(np.isfinite(fx)):
                raise CertificationError("non-finite operator value during certification")
            fn_sq = float(np.dot(fx, fx))
            if fn_sq == 0.0:
                continue
            inner = float(np.dot(fx, x - problem.known_solution))
            if inner < 0:
                rho = max(rho, -inner / fn_sq)
        provenance["rho"] = "closed_form" if problem.is_affine else "numerically_certified"

    # sampled lower bounds can exceed the true averaged value by rounding only
    big_l = min(big_l, sum(l_i) / len(l_i)) if l_i else big_l
    return ProblemConstants(
        L=big_l, L_i_list=l_i, mu=mu, rho=rho, provenance=provenance, notes=tuple(notes)
    )
