"""Deterministic past-extragradient on the diagonal game.

With the full-batch estimator the method contracts the Lyapunov quantity
R_k^2 = ||x_k - x*||^2 + ||x_k - xhat_{k-1}||^2 by at least (1 - omega mu / 2)
per step once omega <= 1/(4L).  This script certifies the game's constants,
runs 2000 iterations, and verifies the per-step rate the hard way.
"""

import numpy as np

from vibench import StepSizePlan, certify_constants, generate_diagonal_game, peg_run

for delta in (3, 10):
    problem = generate_diagonal_game(delta)
    cert = certify_constants(problem)
    L, mu = cert.L, cert.mu
    omega = 1.0 / (4.0 * L)
    print(f"diagonal game delta={delta}: L={L:.4f} mu={mu} cond={L / mu:.3f} omega={omega:.4f}")

    trace = peg_run(problem, StepSizePlan.fixed(omega), 2000, np.array([5.0, -3.0, 2.0, 1.0]))
    r = trace.column("r_metric")
    rate = 1.0 - omega * mu / 2.0
    live = r[:-1] > 1e-20  # ignore steps already at float underflow
    realized = r[1:][live] / r[:-1][live]
    print(f"  guaranteed per-step factor {rate:.4f}; realized "
          f"max {realized.max():.4f}, mean {realized.mean():.4f} over {live.sum()} live steps")
    print(f"  violations of the guaranteed factor: "
          f"{int(np.sum(r[1:] > rate * r[:-1] + 1e-12))}")
    rel = trace.final.sq_dist / trace.records[0].sq_dist
    print(f"  relative error after 2000 steps: {rel:.3e}\n")
