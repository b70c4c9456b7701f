"""Generators for the benchmark problem families.

Four families cover the experimental regimes:

* random quadratic two-player games (strongly monotone; optional
  interpolation so every component vanishes at the solution),
* a planar rotation-plus-shrink family whose mean operator is non-monotone
  but satisfies the weak-Minty inequality,
* a tiny fixed diagonal game with closed-form constants, handy for
  contraction tests with a tunable condition number,
* a two-point 1-D least-squares gradient whose uniform single-element
  estimator has exactly computable, unbounded variance.

Everything is seed-deterministic.  Affine problems round-trip through a
versioned on-disk format: a JSON header followed by little-endian float64
matrix payloads.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import (
    ComponentOperator,
    FiniteSumProblem,
    ProblemConstants,
    VibenchError,
    affine_operator,
)

__all__ = [
    "QuadraticGameSpec",
    "generate_quadratic_game",
    "quadratic_payoff",
    "WeakMviSpec",
    "generate_weak_mvi_problem",
    "generate_diagonal_game",
    "regression_counterexample",
    "save_problem",
    "load_problem",
]

MAX_AMBIENT_DIMENSION = 512


@dataclass(frozen=True)
class QuadraticGameSpec:
    """Parameters of the random quadratic game family.

    Each component couples two d-dimensional blocks through symmetric PSD
    matrices with eigenvalues drawn uniformly from ``a_interval`` and
    ``c_interval`` and a coupling block with singular values from
    ``b_interval``.  ``first_component_intervals`` optionally replaces the
    three intervals for component 0 only (used to plant one badly scaled
    component).  ``interpolated`` makes every component vanish at a sampled
    solution; ``use_inverse_offset_formula`` switches to the alternative
    offset construction b_i = M_i^{-1} z* kept for compatibility (it does not
    interpolate the components).
    """

    n: int = 100
    d: int = 30
    a_interval: tuple[float, float] = (0.1, 1.0)
    b_interval: tuple[float, float] = (0.0, 1.0)
    c_interval: tuple[float, float] = (0.1, 1.0)
    interpolated: bool = False
    seed: int = 0
    first_component_intervals: tuple[tuple[float, float], ...] | None = None
    use_inverse_offset_formula: bool = False
    offset_scale: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise VibenchError("n and d must be positive")
        if 2 * self.d > MAX_AMBIENT_DIMENSION:
            raise VibenchError(f"ambient dimension {2 * self.d} exceeds cap {MAX_AMBIENT_DIMENSION}")
        for lo, hi in (self.a_interval, self.b_interval, self.c_interval):
            if not (0.0 <= lo <= hi):
                raise VibenchError(f"invalid eigenvalue interval [{lo}, {hi}]")
        if self.first_component_intervals is not None:
            if len(self.first_component_intervals) != 3:
                raise VibenchError("first_component_intervals needs exactly 3 intervals")
            for lo, hi in self.first_component_intervals:
                if not (0.0 <= lo <= hi):
                    raise VibenchError(f"invalid eigenvalue interval [{lo}, {hi}]")
        if self.offset_scale < 0:
            raise VibenchError("offset_scale must be nonnegative")


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _sym_psd(rng, d, lo, hi):
    q = _random_orthogonal(rng, d)
    eig = rng.uniform(lo, hi, d)
    m = (q * eig) @ q.T
    return 0.5 * (m + m.T)


def _coupling(rng, d, lo, hi):
    u = _random_orthogonal(rng, d)
    v = _random_orthogonal(rng, d)
    sv = rng.uniform(lo, hi, d)
    return (u * sv) @ v.T


def generate_quadratic_game(spec: QuadraticGameSpec) -> FiniteSumProblem:
    """Generate the quadratic game with certified closed-form constants.

    Components are F_i(z) = M_i z + b_i with M_i = [[A_i, B_i], [-B_i^T, C_i]]
    over z = (x; y).  The stored solution solves the averaged affine system;
    interpolated instances use b_i = -M_i z* so that every component vanishes
    there.  A singular averaged matrix triggers a bounded number of retries
    with derived seeds.
    """
    root = np.random.SeedSequence(spec.seed)
    last_err = None
    for attempt_seq in root.spawn(5):
        rng = np.random.default_rng(attempt_seq)
        d, n = spec.d, spec.n
        mats, offs = [], []
        for i in range(n):
            ia, ib, ic = (
                spec.first_component_intervals
                if (i == 0 and spec.first_component_intervals is not None)
                else (spec.a_interval, spec.b_interval, spec.c_interval)
            )
            a_blk = _sym_psd(rng, d, *ia)
            c_blk = _sym_psd(rng, d, *ic)
            b_blk = _coupling(rng, d, *ib)
            m = np.block([[a_blk, b_blk], [-b_blk.T, c_blk]])
            mats.append(m)
            offs.append(spec.offset_scale * rng.standard_normal(2 * d))
        mbar = np.mean(mats, axis=0)
        try:
            if spec.interpolated or spec.use_inverse_offset_formula:
                z_star = rng.standard_normal(2 * d)
                if spec.use_inverse_offset_formula:
                    offs = [np.linalg.solve(m, z_star) for m in mats]
                else:
                    offs = [-m @ z_star for m in mats]
            bbar = np.mean(offs, axis=0)
            x_star = np.linalg.solve(mbar, -bbar)
            # one step of iterative refinement keeps the residual at rounding level
            x_star -= np.linalg.solve(mbar, mbar @ x_star + bbar)
        except np.linalg.LinAlgError as err:
            last_err = err
            continue
        if not np.all(np.isfinite(x_star)):
            last_err = VibenchError("non-finite solution")
            continue
        components = tuple(affine_operator(m, b) for m, b in zip(mats, offs))
        sym = 0.5 * (mbar + mbar.T)
        constants = ProblemConstants(
            L=float(np.linalg.norm(mbar, 2)),
            L_i_list=tuple(c.lipschitz_bound for c in components),
            mu=max(0.0, float(np.linalg.eigvalsh(sym)[0])),
            provenance={"L": "closed_form", "L_i_list": "closed_form", "mu": "closed_form"},
        )
        return FiniteSumProblem(
            components=components,
            dimension=2 * d,
            known_solution=x_star,
            constants=constants,
            name=f"quadratic_game(n={n}, d={d}, seed={spec.seed})",
            meta={
                "family": "quadratic_game",
                "n": n,
                "d": d,
                "a_interval": list(spec.a_interval),
                "b_interval": list(spec.b_interval),
                "c_interval": list(spec.c_interval),
                "interpolated": spec.interpolated,
                "seed": spec.seed,
                "first_component_intervals": (
                    [list(t) for t in spec.first_component_intervals]
                    if spec.first_component_intervals
                    else None
                ),
                "use_inverse_offset_formula": spec.use_inverse_offset_formula,
                "offset_scale": spec.offset_scale,
            },
        )
    raise VibenchError(f"could not generate a nonsingular game after 5 attempts: {last_err}")


def quadratic_payoff(component: ComponentOperator, x, y) -> float:
    """Scalar payoff whose block gradients (grad_x; -grad_y) equal the component."""
    if not component.is_affine:
        raise VibenchError("payoff reconstruction needs an affine component")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x.shape[0]
    m, b = component.matrix, component.offset
    a_blk, b_blk, c_blk = m[:d, :d], m[:d, d:], m[d:, d:]
    a_vec, c_vec = b[:d], b[d:]
    return float(
        0.5 * x @ a_blk @ x + x @ b_blk @ y - 0.5 * y @ c_blk @ y + a_vec @ x - c_vec @ y
    )


@dataclass(frozen=True)
class WeakMviSpec:
    """Planar family: component i is the rotation-plus-shrink map
    (x, y) -> (zeta_i x + xi_i y, -xi_i x + zeta_i y).

    The coefficient means are pinned exactly to (mean_xi, mean_zeta) by an
    affine correction of the uniform perturbations, which fixes the mean
    operator's modulus to sqrt(mean_xi^2 + mean_zeta^2); the defaults give
    modulus 8 with inward drift -1, so the weak-Minty inequality holds with
    slack parameter 1/32 (twice the minimal valid 1/64).
    """

    n: int = 100
    mean_xi: float = math.sqrt(63.0)
    mean_zeta: float = -1.0
    spread: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise VibenchError("n must be positive")
        if self.spread < 0:
            raise VibenchError("spread must be nonnegative")


def generate_weak_mvi_problem(spec: WeakMviSpec) -> FiniteSumProblem:
    rng = np.random.default_rng(spec.seed)
    xi = np.full(spec.n, spec.mean_xi)
    zeta = np.full(spec.n, spec.mean_zeta)
    if spec.n > 1 and spec.spread > 0:
        eta = rng.uniform(-1.0, 1.0, spec.n) * spec.spread * abs(spec.mean_xi)
        nu = rng.uniform(-1.0, 1.0, spec.n) * spec.spread * abs(spec.mean_zeta)
        xi += eta - eta.mean()
        zeta += nu - nu.mean()
    components = tuple(
        affine_operator(np.array([[z, s], [-s, z]]), np.zeros(2)) for s, z in zip(xi, zeta)
    )
    xi_bar = float(xi.mean())
    zeta_bar = float(zeta.mean())
    modulus = math.hypot(xi_bar, zeta_bar)
    rho_min = max(0.0, -zeta_bar) / modulus**2
    constants = ProblemConstants(
        L=modulus,
        L_i_list=tuple(c.lipschitz_bound for c in components),
        rho=2.0 * rho_min,
        provenance={"L": "closed_form", "L_i_list": "closed_form", "rho": "closed_form"},
        notes=(f"minimal valid rho is {rho_min:.6g}; stored value doubles it",),
    )
    return FiniteSumProblem(
        components=components,
        dimension=2,
        known_solution=np.zeros(2),
        constants=constants,
        name=f"weak_mvi(n={spec.n}, seed={spec.seed})",
        meta={
            "family": "weak_mvi",
            "n": spec.n,
            "mean_xi": spec.mean_xi,
            "mean_zeta": spec.mean_zeta,
            "spread": spec.spread,
            "seed": spec.seed,
        },
    )


def generate_diagonal_game(delta: float) -> FiniteSumProblem:
    """Three diagonal components in R^4 with L = (delta + 2)/3 and mu = 1.

    Component i scales coordinate i by ``delta`` and targets a fixed point
    x_i*; the averaged operator is diagonal, so the constants are exact.
    """
    if delta < 1:
        raise VibenchError("delta must be at least 1")
    d = float(delta)
    mats = [np.diag(v) for v in ([d, 1, 1, 1], [1, d, 1, 1], [1, 1, d, 1])]
    targets = [
        np.array([d, 0.0, 0.0, d]),
        np.array([0.0, d, 0.0, 0.0]),
        np.array([0.0, 0.0, d, 0.0]),
    ]
    components = tuple(affine_operator(m, -m @ t) for m, t in zip(mats, targets))
    mbar = np.mean(mats, axis=0)
    bbar = np.mean([-m @ t for m, t in zip(mats, targets)], axis=0)
    x_star = np.linalg.solve(mbar, -bbar)
    constants = ProblemConstants(
        L=(d + 2.0) / 3.0,
        L_i_list=(d, d, d),
        mu=1.0,
        provenance={"L": "closed_form", "L_i_list": "closed_form", "mu": "closed_form"},
    )
    return FiniteSumProblem(
        components=components,
        dimension=4,
        known_solution=x_star,
        constants=constants,
        name=f"diagonal_game(delta={delta})",
        meta={"family": "diagonal_game", "delta": float(delta)},
    )


def regression_counterexample(a1: float, b1: float, a2: float, b2: float):
    """Two-component 1-D least-squares gradient operator plus its exact
    single-element-sampling variance function.

    Components are F_i(x) = 2 a_i (a_i x - b_i); under uniform single-element
    sampling the estimator variance at x is exactly
    ((a1^2 - a2^2) x - (a1 b1 - a2 b2))^2, a quadratic in x, so no constant
    bounds it unless a1^2 = a2^2.
    """
    if a1 == 0.0 and a2 == 0.0:
        raise VibenchError("at least one slope must be nonzero")
    components = tuple(
        affine_operator(np.array([[2.0 * a * a]]), np.array([-2.0 * a * b]))
        for a, b in ((a1, b1), (a2, b2))
    )
    x_star = np.array([(a1 * b1 + a2 * b2) / (a1 * a1 + a2 * a2)])
    lead = a1 * a1 - a2 * a2
    shift = a1 * b1 - a2 * b2
    constants = ProblemConstants(
        L=a1 * a1 + a2 * a2,
        L_i_list=(2.0 * a1 * a1, 2.0 * a2 * a2),
        mu=a1 * a1 + a2 * a2,
        provenance={"L": "closed_form", "L_i_list": "closed_form", "mu": "closed_form"},
    )
    problem = FiniteSumProblem(
        components=components,
        dimension=1,
        known_solution=x_star,
        constants=constants,
        name=f"regression_counterexample(a=({a1}, {a2}), b=({b1}, {b2}))",
        meta={"family": "counterexample", "a1": a1, "b1": b1, "a2": a2, "b2": b2},
    )

    def variance_fn(x: float) -> float:
        return (lead * float(x) - shift) ** 2

    return problem, variance_fn


# On-disk format: magic, little-endian uint64 header length, JSON header,
# then the raw float64 little-endian array payloads in header order.
_MAGIC = b"VIPROB1\n"


def save_problem(problem: FiniteSumProblem, path) -> None:
    """Serialize an affine problem so runs are replayable without regeneration."""
    if not problem.is_affine:
        raise VibenchError("only affine problems are serializable")
    arrays: list[tuple[str, np.ndarray]] = []
    if problem.known_solution is not None:
        arrays.append(("x_star", problem.known_solution))
    for i, c in enumerate(problem.components):
        arrays.append((f"M_{i}", c.matrix))
        arrays.append((f"b_{i}", c.offset))
    constants = None
    if problem.constants is not None:
        c = problem.constants
        constants = {
            "L": c.L,
            "L_i_list": list(c.L_i_list),
            "mu": c.mu,
            "rho": c.rho,
            "provenance": c.provenance,
            "notes": list(c.notes),
        }
    header = {
        "version": 1,
        "name": problem.name,
        "n": problem.n_components,
        "dimension": problem.dimension,
        "meta": problem.meta,
        "constants": constants,
        "solution_tolerance": problem.solution_tolerance,
        "arrays": [{"key": k, "shape": list(a.shape)} for k, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_problem(path) -> FiniteSumProblem:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise VibenchError(f"not a problem file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise VibenchError(f"unsupported format version {header.get('version')!r}")
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise VibenchError(f"truncated payload for {entry['key']!r}")
            arrays[entry["key"]] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    n = header["n"]
    components = tuple(affine_operator(arrays[f"M_{i}"], arrays[f"b_{i}"]) for i in range(n))
    constants = None
    if header["constants"] is not None:
        c = header["constants"]
        constants = ProblemConstants(
            L=c["L"],
            L_i_list=tuple(c["L_i_list"]),
            mu=c["mu"],
            rho=c["rho"],
            provenance=dict(c["provenance"]),
            notes=tuple(c["notes"]),
        )
    return FiniteSumProblem(
        components=components,
        dimension=header["dimension"],
        known_solution=arrays.get("x_star"),
        constants=constants,
        name=header["name"],
        meta=dict(header["meta"]),
        solution_tolerance=header.get("solution_tolerance", 1e-9),
    )
