"""Tour of the step-size schedules on one stochastic problem.

Runs the single-sample estimator on a strongly monotone quadratic game under
four schedules — constant, switching, horizon-aware, and the decreasing
gamma0/(k+b) baseline — averaged over seeds, and writes an SVG chart of the
relative error curves next to this script.
"""

from pathlib import Path

import numpy as np

from vibench import (
    QuadraticGameSpec,
    SamplerSpec,
    StepSizePlan,
    generate_quadratic_game,
    speg_run,
)
from vibench.bench import write_line_chart
from vibench.sampling import noise_constants_for
from vibench.schedules import switching_threshold

problem = generate_quadratic_game(
    QuadraticGameSpec(n=100, d=30, a_interval=(0.6, 1.0), c_interval=(0.6, 1.0), seed=11)
)
spec = SamplerSpec.minibatch(100, 1)
nc = noise_constants_for(problem, spec)
L, mu = problem.constants.L, problem.constants.mu
omega_bar, k_star = switching_threshold(L, mu, nc.delta)
K = 6 * k_star
print(f"L={L:.3f} mu={mu:.3f} delta={nc.delta:.3f} sigma*^2={nc.sigma_star_sq:.2f}")
print(f"omega_bar={omega_bar:.5f}, switch threshold k*={k_star}, horizon K={K}")

plans = {
    "constant": StepSizePlan.constant(L, mu, nc.delta),
    "switching": StepSizePlan.switching(L, mu, nc.delta),
    "horizon_aware": StepSizePlan.horizon_aware(K, L, mu, nc.delta),
    "baseline": StepSizePlan.hsieh(2.5 / mu, 4 * L * 2.5 / mu),
}

series = []
for name, plan in plans.items():
    curves = []
    for seed in range(10):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 101)))
        x0 = rng.standard_normal(problem.dimension)
        tr = speg_run(problem, spec, plan, K, x0, seed=seed, record_every=max(1, K // 400),
                      op_norm_metric=False)
        curves.append(tr.column("sq_dist") / tr.records[0].sq_dist)
        ks = tr.column("k")
    mean_curve = np.mean(curves, axis=0)
    series.append((name, ks, mean_curve))
    print(f"  {name:14s} final relative error (10-seed mean): {mean_curve[-1]:.3e}")

out = Path(__file__).with_name("schedule_tour.svg")
write_line_chart(out, series, "step-size schedules", "relative error")
print(f"chart written to {out}")
