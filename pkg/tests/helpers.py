"""Shared test utilities: independent reference solvers and data factories."""

import numpy as np

from ecdr.dataset import CombinedDataset
from ecdr.solver import CoefficientVector, FitResult, NuisanceFits


def make_fits(alpha_eff, gamma, alpha_nv, beta) -> NuisanceFits:
    """Wrap raw coefficient arrays as a NuisanceFits (diagnostics are dummies)."""

    def wrap(values):
        values = np.asarray(values, dtype=float)
        return FitResult(coefficients=CoefficientVector(values), lam=0.0,
                         objective_trace=np.zeros(1), converged=True,
                         iterations=0, kkt_violation=0.0)

    return NuisanceFits(gamma=wrap(gamma), beta=wrap(beta),
                        alpha_eff=wrap(alpha_eff), alpha_nv=wrap(alpha_nv))


def random_dataset(rng, N=None, d=None, external=True):
    """Small random dataset with overlap in every (r, t) cell."""
    N = N or int(rng.integers(40, 200))
    d = d or int(rng.integers(1, 6))
    x = rng.standard_normal((N, d))
    logit_r = 0.5 + 0.6 * x[:, 0]
    r = (rng.random(N) < 1.0 / (1.0 + np.exp(-logit_r))).astype(float)
    if not external:
        r = np.ones(N)
    logit_t = -0.3 + 0.5 * x[:, 0]
    t = np.where(r > 0, (rng.random(N) < 1.0 / (1.0 + np.exp(-logit_t))).astype(float), 0.0)
    y = x[:, 0] * 0.8 + rng.standard_normal(N)
    # re-draw until every required cell is populated
    if (r * t).sum() < 2 or (r * (1 - t)).sum() < 2 or (external and (1 - r).sum() < 2):
        return random_dataset(rng, N, d, external)
    return CombinedDataset.from_columns(r, t, y, x)


def newton_exp_tilt(X, e, l, tol=1e-12, max_iter=200):
    """Dense Newton minimizer of (1/N)[e'exp(Xc) - l'Xc]; reference oracle."""
    N, p = X.shape
    c = np.zeros(p)
    c[0] = np.log(l.sum() / e.sum())
    for _ in range(max_iter):
        eta = X @ c
        w = e * np.exp(eta)
        grad = X.T @ (w - l) / N
        hess = (X * w[:, None]).T @ X / N
        step = np.linalg.solve(hess, grad)
        # halve until the objective decreases (guards long Newton steps)
        f0 = (w.sum() - l @ eta) / N
        scale = 1.0
        for _ in range(60):
            cand = c - scale * step
            eta_c = X @ cand
            f1 = (e @ np.exp(eta_c) - l @ eta_c) / N
            if f1 <= f0 + 1e-14:
                break
            scale *= 0.5
        c = cand
        if np.abs(grad).max() < tol:
            break
    return c


def weighted_ls_oracle(X, w, y):
    """Closed-form weighted least squares via the normal equations."""
    Xw = X * w[:, None]
    return np.linalg.solve(Xw.T @ X, Xw.T @ y)
