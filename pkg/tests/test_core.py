import numpy as np
import pytest

from vibench import (
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
    evaluate_full,
    generate_diagonal_game,
    generate_quadratic_game,
    generate_weak_mvi_problem,
)
from vibench.problems import QuadraticGameSpec, WeakMviSpec

from conftest import random_affine_problem


def identity_problem():
    return FiniteSumProblem(
        components=(affine_operator(np.eye(1)),), dimension=1, known_solution=np.zeros(1)
    )


class TestPoints:
    def test_rejects_nan(self):
        with pytest.raises(VibenchError, match="non-finite"):
            as_point([1.0, np.nan])

    def test_rejects_inf(self):
        with pytest.raises(VibenchError):
            as_point([np.inf])

    def test_dimension_check_names_both(self):
        with pytest.raises(DimensionMismatch) as exc:
            as_point([1.0, 2.0], dim=3)
        assert "2" in str(exc.value) and "3" in str(exc.value)


class TestEvaluateFull:
    def test_identity_single_component(self):
        p = identity_problem()
        assert evaluate_full(p, np.array([2.0])) == pytest.approx(np.array([2.0]))

    def test_two_components_cancel(self):
        comps = (affine_operator(np.eye(3)), affine_operator(-np.eye(3)))
        p = FiniteSumProblem(components=comps, dimension=3)
        x = np.array([1.0, -2.0, 5.0])
        np.testing.assert_array_equal(evaluate_full(p, x), np.zeros(3))

    def test_quadratic_game_root_matches_dense_solve(self):
        p = random_affine_problem(4, 5, seed=3, shift=3.0)
        # independent oracle: direct dense solve of the averaged affine system
        mbar = np.mean([c.matrix for c in p.components], axis=0)
        bbar = np.mean([c.offset for c in p.components], axis=0)
        root = np.linalg.solve(mbar, -bbar)
        assert np.linalg.norm(evaluate_full(p, root)) < 1e-10

    def test_dimension_mismatch(self):
        p = identity_problem()
        with pytest.raises(DimensionMismatch):
            evaluate_full(p, np.array([1.0, 2.0]))


class TestProblemValidation:
    def test_needs_components(self):
        with pytest.raises(VibenchError):
            FiniteSumProblem(components=(), dimension=1)

    def test_component_dimensions_must_agree(self):
        comps = (affine_operator(np.eye(2)), affine_operator(np.eye(3)))
        with pytest.raises(DimensionMismatch):
            FiniteSumProblem(components=comps, dimension=2)

    def test_bad_solution_rejected(self):
        with pytest.raises(VibenchError, match="residual"):
            FiniteSumProblem(
                components=(affine_operator(np.eye(2)),),
                dimension=2,
                known_solution=np.ones(2),
            )

    def test_operator_requires_eval_or_matrix(self):
        with pytest.raises(VibenchError):
            ComponentOperator(dim=2)


class TestConstantsValidation:
    def test_mu_cannot_exceed_lipschitz(self):
        with pytest.raises(VibenchError, match="exceeds"):
            ProblemConstants(L=1.0, L_i_list=(1.0,), mu=2.0)

    def test_average_bound(self):
        with pytest.raises(VibenchError, match="triangle"):
            ProblemConstants(L=4.0, L_i_list=(1.0, 1.0, 7.0))

    def test_noise_constants_nonnegative(self):
        with pytest.raises(VibenchError):
            NoiseConstants(delta=-1.0, sigma_star_sq=0.0)
        with pytest.raises(VibenchError):
            NoiseConstants(delta=0.0, sigma_star_sq=1.0, provenance="guessed")


class TestCertification:
    def test_diagonal_game_small_gap(self):
        c = certify_constants(generate_diagonal_game(3))
        assert c.L == pytest.approx(5.0 / 3.0, abs=1e-12)
        assert c.mu == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_game_wide_gap(self):
        c = certify_constants(generate_diagonal_game(10))
        assert c.L == pytest.approx(4.0, abs=1e-12)
        assert c.mu == pytest.approx(1.0, abs=1e-12)
        assert c.L / c.mu == pytest.approx(4.0, abs=1e-12)

    def test_scalar_linear_map(self):
        p = FiniteSumProblem(
            components=(affine_operator(2.0 * np.eye(1)),),
            dimension=1,
            known_solution=np.zeros(1),
        )
        c = certify_constants(p)
        assert c.L == pytest.approx(2.0) and c.mu == pytest.approx(2.0)
        assert c.provenance["L"] == "closed_form"

    def test_sampled_lower_bounds_for_closures(self):
        affine = random_affine_problem(3, 2, seed=5, shift=2.0)
        comps = tuple(
            ComponentOperator(dim=2, evaluator=(lambda x, m=c.matrix, b=c.offset: m @ x + b))
            for c in affine.components
        )
        p = FiniteSumProblem(
            components=comps, dimension=2, known_solution=affine.known_solution
        )
        c = certify_constants(p, sample_count=400, seed=1)
        assert c.provenance["L"] == "numerically_certified"
        for est, (exact,) in zip(c.L_i_list, [(x,) for x in affine.constants.L_i_list]):
            assert est <= exact + 1e-9
            assert est >= 0.5 * exact  # sampled bound should not be wildly loose

    def test_mu_requires_solution(self):
        p = FiniteSumProblem(components=(affine_operator(np.eye(2)),), dimension=2)
        with pytest.raises(CertificationError):
            certify_constants(p, certify_mu=True)

    def test_mu_clamped_and_noted(self):
        # averaged operator with a negative symmetric part
        p = FiniteSumProblem(
            components=(affine_operator(np.diag([-1.0, 2.0])),),
            dimension=2,
            known_solution=np.zeros(2),
        )
        c = certify_constants(p)
        assert c.mu == 0.0
        assert any("not quasi-strongly monotone" in note for note in c.notes)
        assert not c.quasi_strongly_monotone

    def test_rho_certification(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=10, seed=0))
        c = certify_constants(w, sample_count=500, seed=2, certify_rho=True)
        assert c.rho == pytest.approx(1.0 / 64.0, rel=1e-9)


class TestStructuralInvariants:
    def test_quasi_strong_inequality_holds_everywhere(self):
        p = generate_quadratic_game(QuadraticGameSpec(n=8, d=4, seed=9))
        mu = p.constants.mu
        xs = p.known_solution
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((1000, p.dimension)) * 5 + xs
        for x in pts:
            f = evaluate_full(p, x)
            assert f @ (x - xs) - mu * ((x - xs) @ (x - xs)) >= -1e-9

    def test_weak_mvi_inequality_holds_everywhere(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=20, seed=3))
        rho = w.constants.rho
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((1000, 2)) * 5
        for x in pts:
            f = evaluate_full(w, x)
            assert f @ x + rho * (f @ f) >= -1e-9

    def test_component_lipschitz_bounds(self):
        p = generate_quadratic_game(QuadraticGameSpec(n=6, d=3, seed=4))
        rng = np.random.default_rng(2)
        xs = rng.standard_normal((1000, p.dimension))
        ys = rng.standard_normal((1000, p.dimension))
        diffs = (xs - ys).T
        norms = np.linalg.norm(diffs, axis=0)
        for comp, li in zip(p.components, p.constants.L_i_list):
            vals = np.linalg.norm(comp.matrix @ diffs, axis=0)
            assert np.all(vals <= (li + 1e-9) * norms)
