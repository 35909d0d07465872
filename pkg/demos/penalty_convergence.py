"""How the penalized solution approaches the projected-SOR reference as eps shrinks.

    python3 demos/penalty_convergence.py

For each eps the script prints the spot price, the largest nodal distance to
the PSOR surface and the complementarity residual of the unpenalized problem.
Inside the exercise region the penalized value sits about eps*ln(C0/(rK))
above the payoff, so the distance to PSOR shrinks roughly in proportion to eps.
"""
import numpy as np

from svamerican import SolveConfig, build_grid, heston_model, psor_solve, solve

model = heston_model(kappa=2.0, m=0.04, xi=0.5, rho=-0.7, r=0.05, K=1.0, T=0.5)
grid = build_grid(model, 4.0, 1.0, 51, 31, 50)

reference = psor_solve(model, grid, SolveConfig())
print(f"PSOR price {reference.price_at(1.0, 0.04):.6f}\n")
print("   eps       price      max|u - psor|   residual")
for eps in (1e-2, 3e-3, 1e-3, 3e-4, 1e-4):
    res = solve(model, grid, SolveConfig(epsilon=eps))
    gap = np.abs(res.values - reference.values).max()
    print(f"  {eps:7.0e}   {res.price_at(1.0, 0.04):.6f}   {gap:.3e}       "
          f"{res.complementarity_residual.max():.3e}")

# Continuation: warm-start each eps from the previous one.
cont = solve(model, grid, SolveConfig(epsilon_schedule=(1e-2, 1e-3, 1e-4, 1e-5)))
print(f"\ncontinuation to 1e-5: max|u - psor| = "
      f"{np.abs(cont.values - reference.values).max():.3e}")
