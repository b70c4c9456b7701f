import numpy as np
import pytest

from vibench import FiniteSumProblem, affine_operator, certify_constants


def random_affine_problem(n, d, seed, shift=0.0):
    """Random affine components with a solved averaged system; ``shift`` adds
    a multiple of the identity to make the problem strongly monotone."""
    rng = np.random.default_rng(seed)
    comps = tuple(
        affine_operator(rng.standard_normal((d, d)) + shift * np.eye(d), rng.standard_normal(d))
        for _ in range(n)
    )
    mbar = np.mean([c.matrix for c in comps], axis=0)
    bbar = np.mean([c.offset for c in comps], axis=0)
    x_star = np.linalg.solve(mbar, -bbar)
    x_star -= np.linalg.solve(mbar, mbar @ x_star + bbar)
    problem = FiniteSumProblem(components=comps, dimension=d, known_solution=x_star)
    constants = certify_constants(problem, certify_mu=False)
    return FiniteSumProblem(
        components=comps, dimension=d, known_solution=x_star, constants=constants
    )


@pytest.fixture(scope="session")
def toy_problem():
    return random_affine_problem(3, 2, seed=7, shift=2.0)
