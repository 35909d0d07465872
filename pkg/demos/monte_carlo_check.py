"""Cross-check the PDE price with three Monte Carlo estimators on shared paths.

    python3 demos/monte_carlo_check.py [n_paths]

European value <= value of the PDE exercise rule <= Longstaff-Schwartz value,
and the PDE price should sit on top of all three within sampling error.
"""
import sys

from svamerican import (SolveConfig, build_grid, european_value, extract, heston_model,
                        lsmc_value, policy_value, simulate, solve)

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000

model = heston_model(kappa=2.0, m=0.04, xi=0.5, rho=-0.7, r=0.05, K=1.0, T=0.5)
grid = build_grid(model, 4.0, 1.0, 101, 51, 100)
result = solve(model, grid, SolveConfig(epsilon=1e-3))
pde = result.price_at(1.0, 0.04)

paths = simulate(model, x0=1.0, y0=0.04, t0=0.0, n_paths=n_paths, n_steps=250, seed=12345)
estimates = {
    "european": european_value(paths, model),
    "PDE exercise rule": policy_value(paths, extract(result), model),
    "Longstaff-Schwartz": lsmc_value(paths, model),
}

print(f"PDE price at (x=1, y=0.04, t=0): {pde:.5f}")
for name, est in estimates.items():
    z = (pde - est.value) / est.std_error if est.std_error else float("nan")
    print(f"  {name:<20} {est.value:.5f} +- {est.std_error:.5f}   (PDE - MC) / SE = {z:+.2f}")
