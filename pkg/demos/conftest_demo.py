"""Shared helper for the demo scripts: a small seeded affine problem."""

import numpy as np

from vibench import FiniteSumProblem, affine_operator, certify_constants


def toy_problem(n=6, d=3, seed=0, shift=2.0):
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
    constants = certify_constants(problem)
    return FiniteSumProblem(
        components=comps, dimension=d, known_solution=x_star, constants=constants
    )
