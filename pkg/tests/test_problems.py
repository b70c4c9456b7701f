import numpy as np
import pytest

from vibench import (
    QuadraticGameSpec,
    SamplerSpec,
    VibenchError,
    WeakMviSpec,
    apply_estimator,
    certify_constants,
    draw,
    evaluate_full,
    generate_diagonal_game,
    generate_quadratic_game,
    generate_weak_mvi_problem,
    load_problem,
    quadratic_payoff,
    regression_counterexample,
    save_problem,
)
from vibench.core import component_star_norms_sq, component_values


@pytest.fixture(scope="module")
def default_game():
    return generate_quadratic_game(QuadraticGameSpec(seed=0))


class TestQuadraticGame:
    def test_default_shape(self, default_game):
        assert default_game.n_components == 100
        assert default_game.dimension == 60
        assert np.linalg.norm(evaluate_full(default_game, default_game.known_solution)) <= 1e-9

    def test_default_monotonicity_floor(self, default_game):
        assert default_game.constants.mu >= 0.1 - 1e-9

    def test_block_structure(self, default_game):
        m = default_game.components[0].matrix
        d = 30
        np.testing.assert_allclose(m[:d, :d], m[:d, :d].T)  # symmetric block
        np.testing.assert_allclose(m[d:, :d], -m[:d, d:].T)  # skew coupling

    def test_interpolated_components_vanish(self):
        p = generate_quadratic_game(QuadraticGameSpec(n=20, d=6, interpolated=True, seed=1))
        vals = component_values(p, p.known_solution)
        assert np.linalg.norm(vals, axis=1).max() <= 1e-10

    def test_inverse_offset_formula_does_not_interpolate(self):
        p = generate_quadratic_game(
            QuadraticGameSpec(n=6, d=3, interpolated=True, seed=1, use_inverse_offset_formula=True)
        )
        vals = component_values(p, p.known_solution)
        assert np.linalg.norm(vals, axis=1).max() > 1e-3
        assert np.linalg.norm(evaluate_full(p, p.known_solution)) <= 1e-9

    def test_first_component_override(self):
        p = generate_quadratic_game(
            QuadraticGameSpec(
                n=10, d=4, seed=2, first_component_intervals=((0.1, 9.0), (0.0, 1.0), (0.1, 9.0))
            )
        )
        li = p.constants.L_i_list
        assert li[0] > 4 * max(li[1:])

    def test_block_gradients_match_finite_differences(self):
        p = generate_quadratic_game(QuadraticGameSpec(n=4, d=3, seed=3))
        rng = np.random.default_rng(0)
        h = 1e-5
        for _ in range(10):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            comp = p.components[rng.integers(0, 4)]
            f = comp(np.concatenate([x, y]))
            grad = np.empty(6)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                grad[j] = (quadratic_payoff(comp, x + e, y) - quadratic_payoff(comp, x - e, y)) / (2 * h)
                grad[3 + j] = -(
                    quadratic_payoff(comp, x, y + e) - quadratic_payoff(comp, x, y - e)
                ) / (2 * h)
            np.testing.assert_allclose(f, grad, rtol=1e-6, atol=1e-7)

    def test_seed_determinism(self):
        a = generate_quadratic_game(QuadraticGameSpec(n=5, d=3, seed=42))
        b = generate_quadratic_game(QuadraticGameSpec(n=5, d=3, seed=42))
        for ca, cb in zip(a.components, b.components):
            np.testing.assert_array_equal(ca.matrix, cb.matrix)
            np.testing.assert_array_equal(ca.offset, cb.offset)

    def test_certification_self_consistency(self, default_game):
        re = certify_constants(default_game, seed=1)
        assert re.L == pytest.approx(default_game.constants.L, rel=1e-8)
        assert re.mu == pytest.approx(default_game.constants.mu, rel=1e-8)
        np.testing.assert_allclose(re.L_i_list, default_game.constants.L_i_list, rtol=1e-8)

    def test_dimension_cap(self):
        with pytest.raises(VibenchError, match="cap"):
            QuadraticGameSpec(n=2, d=300)


class TestWeakMviFamily:
    def test_exact_means_and_modulus(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=100, seed=1))
        xi = np.array([c.matrix[0, 1] for c in w.components])
        zeta = np.array([c.matrix[0, 0] for c in w.components])
        assert xi.mean() == pytest.approx(np.sqrt(63.0), abs=1e-12)
        assert zeta.mean() == pytest.approx(-1.0, abs=1e-12)
        assert w.constants.L == pytest.approx(8.0, abs=1e-12)
        assert w.constants.rho == pytest.approx(1.0 / 32.0, abs=1e-12)

    def test_mean_operator_at_unit_point(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=100, seed=1))
        f = evaluate_full(w, np.array([1.0, 0.0]))
        assert f[0] == pytest.approx(-1.0, abs=1e-10)
        assert f[1] == pytest.approx(-np.sqrt(63.0), abs=1e-10)
        assert np.linalg.norm(f) == pytest.approx(8.0, abs=1e-10)

    def test_origin_is_solution(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=30, seed=4))
        np.testing.assert_array_equal(evaluate_full(w, np.zeros(2)), np.zeros(2))

    def test_alignment_ratio_is_constant(self):
        w = generate_weak_mvi_problem(WeakMviSpec(n=50, seed=5))
        rng = np.random.default_rng(0)
        for _ in range(1000):
            z = rng.standard_normal(2) * 4
            f = evaluate_full(w, z)
            assert (f @ z) / (f @ f) == pytest.approx(-1.0 / 64.0, abs=1e-12)
            assert f @ z >= -w.constants.rho * (f @ f)


class TestDiagonalGame:
    def test_unit_case(self):
        p = generate_diagonal_game(1)
        for c in p.components:
            np.testing.assert_array_equal(c.matrix, np.eye(4))
        assert p.constants.L == 1.0 and p.constants.mu == 1.0

    def test_solution_and_constants(self):
        p = generate_diagonal_game(3)
        assert np.linalg.norm(evaluate_full(p, p.known_solution)) <= 1e-12
        assert p.constants.L == pytest.approx(5.0 / 3.0) and p.constants.mu == 1.0

    def test_rejects_small_delta(self):
        with pytest.raises(VibenchError):
            generate_diagonal_game(0.5)


class TestCounterexample:
    def test_equal_slopes_keep_variance_constant(self):
        _, var = regression_counterexample(2.0, 1.0, 2.0, -3.0)
        assert var(0.0) == var(10.0) == var(-50.0)

    def test_variance_matches_monte_carlo(self):
        problem, var = regression_counterexample(2.0, 0.0, 1.0, 0.0)
        assert var(10.0) == pytest.approx(900.0)
        spec = SamplerSpec.single_element([0.5, 0.5])
        rng = np.random.default_rng(0)
        x = np.array([10.0])
        f = evaluate_full(problem, x)
        vals = np.array(
            [float(np.sum((apply_estimator(problem, draw(spec, rng), x) - f) ** 2)) for _ in range(20_000)]
        )
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - 900.0) <= 3 * se + 1e-9

    def test_quadratic_growth_coefficient(self):
        a1, b1, a2, b2 = 1.5, 0.3, 0.5, -0.2
        _, var = regression_counterexample(a1, b1, a2, b2)
        lead = (a1**2 - a2**2) ** 2
        assert var(1e6) / 1e12 == pytest.approx(lead, rel=1e-3)

    def test_degenerate_rejected(self):
        with pytest.raises(VibenchError):
            regression_counterexample(0.0, 1.0, 0.0, 2.0)


class TestSerialization:
    def test_round_trip(self, tmp_path, default_game):
        path = tmp_path / "game.bin"
        save_problem(default_game, path)
        back = load_problem(path)
        assert back.n_components == default_game.n_components
        assert back.dimension == default_game.dimension
        np.testing.assert_array_equal(back.known_solution, default_game.known_solution)
        for ca, cb in zip(default_game.components, back.components):
            np.testing.assert_array_equal(ca.matrix, cb.matrix)
            np.testing.assert_array_equal(ca.offset, cb.offset)
        assert back.constants.L == default_game.constants.L
        assert back.constants.L_i_list == default_game.constants.L_i_list
        x = np.random.default_rng(0).standard_normal(60)
        np.testing.assert_array_equal(evaluate_full(back, x), evaluate_full(default_game, x))
        assert back.meta == default_game.meta

    def test_star_norms_preserved(self, tmp_path):
        p = generate_diagonal_game(3)
        save_problem(p, tmp_path / "d.bin")
        back = load_problem(tmp_path / "d.bin")
        np.testing.assert_allclose(
            component_star_norms_sq(back), component_star_norms_sq(p), rtol=0, atol=0
        )

    def test_rejects_garbage(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"not a problem file")
        with pytest.raises(VibenchError, match="magic"):
            load_problem(bad)
