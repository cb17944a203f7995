"""Inside the penalized fits: paths, certificates, calibration.

Walks one odds-calibration problem down its penalty path, then verifies the
two properties the estimators rely on: the KKT stationarity certificate and
the exact moment-balancing identities at the fitted weights.

Run:  python demos/04_solver_diagnostics.py
"""

import numpy as np

from ecdr import ModelSpec, fit_nuisances, gamma_problem, generate, solve_path
from ecdr.dataset import standardize

data = generate(ModelSpec.model1(6), 1500, seed=21)
sdata, scaling = standardize(data)

prob = gamma_problem(sdata)
grid = prob.default_grid(n_points=12)
print(f"lambda_max = {grid[0]:.4f}; path of {grid.size} points down to "
      f"{grid[-1]:.6f}")

fits = solve_path(prob, grid)
print(f"\n{'lambda':>10s} {'nnz':>4s} {'iters':>6s} {'kkt':>9s} {'objective':>11s}")
for lam, fit in zip(grid, fits):
    print(f"{lam:10.5f} {fit.coefficients.support.size:4d} {fit.iterations:6d} "
          f"{fit.kkt_violation:9.2e} {fit.objective_trace[-1]:11.6f}")

# every trace is monotone and every converged fit carries its certificate
assert all(np.all(np.diff(f.objective_trace) <= 1e-12) for f in fits)
assert all(f.kkt_violation <= 1e-6 for f in fits if f.converged)
print("\nall traces monotone; all KKT certificates within 1e-6")

# the full pipeline: fitted odds weights balance the treated moments exactly
nuis = fit_nuisances(data, lambdas="cv", seed=4)
rt = data.r * data.t
w = np.exp(data.x @ nuis.gamma.coefficients.values)
lhs = ((1 - rt) * w[None, :] * data.x.T).sum(axis=1) / data.N
rhs = (rt * data.x.T).sum(axis=1) / data.N
print("\nmoment balance (weighted controls vs treated), intercept coordinate:")
print(f"  {lhs[0]:.8f} vs {rhs[0]:.8f}  (match within 1e-6)")
print("slope coordinates differ by at most lambda =", round(nuis.lambdas["gamma"], 6))
print("  max gap:", float(np.abs(lhs[1:] - rhs[1:]).max()))
