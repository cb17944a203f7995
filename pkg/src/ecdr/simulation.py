"""Synthetic data generators, brute-force effect oracle, and study harness.

Two generative designs are provided.  In the first ("M1") the pooled sample
is drawn subject by subject with a source probability proportional to the
ratio of two log-linear propensities, and the control outcome mean is a
nonlinear transform of the covariates, so a linear outcome model is
misspecified while both propensity models are log-linear and correct.  In the
second ("M2", three cases) primary and external blocks are drawn from two
Gaussians with shifted means; the outcome mean is exactly linear.

The study harness runs replicated end-to-end fits and aggregates bias, spread,
reported standard errors, coverage, and relative efficiency per method.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .dataset import CombinedDataset
from .estimators import infer
from .solver import NuisanceFits, SolverError, fit_nuisances

# Moments of U + max(U+1, 0)^2 for U ~ N(0,1), frozen from the closed-form
# truncated-normal expressions 2*Phi(1)+phi(1) and 1+14*Phi(1)+10*phi(1).
TRANSFORM_MEAN = 1.9246602166562292
TRANSFORM_SD = 3.3903121892492187

OUTCOME_COEFS = (1.0, 0.5, 0.25, 0.125)

# Log-linear generative propensities of design M1.  The treated-share
# intercept is -1 (not the published 0): with 0 the realized source/treated
# shares are (0.24, 0.50) instead of the documented (0.4, 0.27) targets, and
# the benchmark efficiency ratios are not reproducible.  See README.
M1_DELTA_INTERCEPT = -2.0
M1_DELTA_SLOPE = 0.125
M1_PROP_INTERCEPT = -1.0
M1_PROP_SLOPE = 0.125

M2_MU_SHIFT = -3.0
M2_PROP_INTERCEPT = -0.5  # case i: expit(-0.5 + 0.125 x4)
M2_PROP_SLOPE = 0.125
M2_PROP_CONST = 0.7       # cases ii/iii


@dataclass(frozen=True)
class ModelSpec:
    """Which generative design to draw from, and how it is sized.

    ``sizing`` is "total" (size argument = pooled N), "fixed-external"
    (size = primary n, external block of ``external_m`` rows), or "ratio"
    (size = primary n, external block of ``external_ratio * n`` rows).
    """

    model: str                     # "M1" | "M2i" | "M2ii" | "M2iii"
    d: int
    sizing: str
    external_m: int = 1000
    external_ratio: float = 2.0
    cov_decay: float = 2.0
    mu_shift: float = M2_MU_SHIFT
    outcome_coefs: tuple = OUTCOME_COEFS
    noise_var_control: float = 1.0
    noise_var_treated: float = 0.5

    def __post_init__(self):
        if self.model not in ("M1", "M2i", "M2ii", "M2iii"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.d < 4:
            raise ValueError("d must be at least 4 (outcome uses four coordinates)")
        if self.sizing not in ("total", "fixed-external", "ratio"):
            raise ValueError(f"unknown sizing {self.sizing!r}")

    @classmethod
    def model1(cls, d: int) -> "ModelSpec":
        return cls(model="M1", d=d, sizing="total")

    @classmethod
    def model2(cls, case: str, d: int, external_m: int = 1000) -> "ModelSpec":
        if case not in ("i", "ii", "iii"):
            raise ValueError(f"unknown case {case!r}")
        sizing = "ratio" if case == "iii" else "fixed-external"
        return cls(model=f"M2{case}", d=d, sizing=sizing, external_m=external_m)


def ar_correlation(d: int, decay: float = 2.0) -> np.ndarray:
    """Correlation matrix with entries decay^-|j-k|, built explicitly."""
    idx = np.arange(d)
    return decay ** (-np.abs(idx[:, None] - idx[None, :]).astype(float))


def _chol(d: int, decay: float) -> np.ndarray:
    return np.linalg.cholesky(ar_correlation(d, decay))


def _transform_first_four(u: np.ndarray) -> np.ndarray:
    """Apply the standardized nonlinear warp to the first four columns."""
    out = u.copy()
    for j in range(4):
        w = u[:, j] + np.maximum(u[:, j] + 1.0, 0.0) ** 2
        out[:, j] = (w - TRANSFORM_MEAN) / TRANSFORM_SD
    return out


def _outcomes(rng, mu0, t, spec):
    y0 = mu0 + rng.standard_normal(mu0.size) * np.sqrt(spec.noise_var_control)
    y1 = rng.standard_normal(mu0.size) * np.sqrt(spec.noise_var_treated)
    return t * y1 + (1.0 - t) * y0


def gen_model1(N: int, d: int, seed, spec: ModelSpec | None = None) -> CombinedDataset:
    """Draw a pooled sample of size N from design M1."""
    spec = spec or ModelSpec.model1(d)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((N, d)) @ _chol(d, spec.cov_decay).T
    x1 = u[:, 0]
    delta = expit(M1_DELTA_INTERCEPT + M1_DELTA_SLOPE * x1)
    p = expit(M1_PROP_INTERCEPT + M1_PROP_SLOPE * x1)
    r = (rng.random(N) < delta / p).astype(float)
    t = np.where(r > 0, (rng.random(N) < p).astype(float), 0.0)
    mu0 = _transform_first_four(u)[:, :4] @ np.asarray(spec.outcome_coefs)
    y = _outcomes(rng, mu0, t, spec)
    return CombinedDataset.from_columns(r, t, y, u)


def gen_model2(case: str, n: int, d: int, seed, m: int | None = None,
               spec: ModelSpec | None = None) -> CombinedDataset:
    """Draw n primary rows and m external-control rows from design M2."""
    spec = spec or ModelSpec.model2(case, d)
    if m is None:
        m = int(round(spec.external_ratio * n)) if spec.sizing == "ratio" else spec.external_m
    rng = np.random.default_rng(seed)
    L = _chol(d, spec.cov_decay).T
    mu1 = np.zeros(d)
    mu1[:4] = spec.mu_shift
    x = np.vstack([
        rng.standard_normal((n, d)) @ L,
        rng.standard_normal((m, d)) @ L + mu1,
    ])
    r = np.concatenate([np.ones(n), np.zeros(m)])
    if case == "i":
        p = expit(M2_PROP_INTERCEPT + M2_PROP_SLOPE * x[:, 3])
    else:
        p = np.full(n + m, M2_PROP_CONST)
    t = np.where(r > 0, (rng.random(n + m) < p).astype(float), 0.0)
    mu0 = x[:, :4] @ np.asarray(spec.outcome_coefs)
    y = _outcomes(rng, mu0, t, spec)
    return CombinedDataset.from_columns(r, t, y, x)


def generate(spec: ModelSpec, size: int, seed) -> CombinedDataset:
    """Draw one dataset; ``size`` is N for sizing "total", primary n otherwise."""
    if spec.model == "M1":
        return gen_model1(size, spec.d, seed, spec=spec)
    case = spec.model[2:]
    return gen_model2(case, size, spec.d, seed, spec=spec)


def oracle_theta(spec: ModelSpec, draws: int = 10_000_000, seed=0,
                 chunk: int = 1_000_000) -> tuple[float, float]:
    """Brute-force Monte Carlo of the target effect with its MC standard error.

    Samples covariates (and selection) from the primary-study law and averages
    the known conditional contrast over treated primary subjects.  Only the
    first four coordinates matter, so sampling is done in dimension four.
    """
    coefs = np.asarray(spec.outcome_coefs)
    L4 = _chol(4, spec.cov_decay).T
    rng = np.random.default_rng(seed)
    total, total_sq, count = 0.0, 0.0, 0
    remaining = draws
    while remaining > 0:
        b = min(chunk, remaining)
        remaining -= b
        u = rng.standard_normal((b, 4)) @ L4
        if spec.model == "M1":
            x1 = u[:, 0]
            delta = expit(M1_DELTA_INTERCEPT + M1_DELTA_SLOPE * x1)
            p = expit(M1_PROP_INTERCEPT + M1_PROP_SLOPE * x1)
            sel = (rng.random(b) < delta / p) & (rng.random(b) < p)
            vals = -(_transform_first_four(u)[sel] @ coefs)
        else:
            if spec.model == "M2i":
                p = expit(M2_PROP_INTERCEPT + M2_PROP_SLOPE * u[:, 3])
            else:
                p = np.full(b, M2_PROP_CONST)
            sel = rng.random(b) < p
            vals = -(u[sel] @ coefs)
        total += vals.sum()
        total_sq += float(vals @ vals)
        count += vals.size
    mean = total / count
    var = total_sq / count - mean * mean
    return float(mean), float(np.sqrt(var / count))


# -- replicated study ------------------------------------------------------

METHODS = ("nv", "eff", "safe")


def _replicate(spec, size, rep, seed, lambda_policy, cv_folds, level, grid_size,
               grid_ratio, cv_rule) -> dict:
    """One end-to-end replicate; failures are reported, not raised."""
    data = generate(spec, size, seed=[seed, size, rep, 0])
    try:
        fits = fit_nuisances(data, lambdas=lambda_policy, cv_folds=cv_folds,
                             seed=[seed, size, rep, 1], grid_size=grid_size,
                             grid_ratio=grid_ratio, cv_rule=cv_rule)
        if not fits.all_converged():
            return {"error": "solver did not converge"}
        reports = infer(data, fits, level=level)
    except SolverError as exc:
        return {"error": str(exc)}
    out = {}
    for m in METHODS:
        rep_m = reports[m]
        out[m] = (rep_m.theta, rep_m.std_error, rep_m.ci_lower, rep_m.ci_upper,
                  rep_m.components[{"nv": "V_nv", "eff": "V_eff", "safe": "V_a"}[m]])
    return out


@dataclass
class MetricsTable:
    """Aggregated study results: one row per (cell, method)."""

    rows: list[dict]
    reps: int
    mc_seed: int
    config: dict

    def to_json_dict(self) -> dict:
        return {"config": self.config, "reps": self.reps, "mc_seed": self.mc_seed,
                "rows": self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"config": self.config, "reps": self.reps,
                                     "mc_seed": self.mc_seed}, sort_keys=True) + "\n")
        cols = ["model", "d", "size", "n_primary", "N_total", "method", "bias",
                "sd", "mean_se", "coverage", "are", "theta_star", "reps_used",
                "failures"]
        buf.write(",".join(cols) + "\n")
        for row in self.rows:
            buf.write(",".join(_csv_field(row[c]) for c in cols) + "\n")
        return buf.getvalue()

    def cell(self, size: int, method: str) -> dict:
        for row in self.rows:
            if row["size"] == size and row["method"] == method:
                return row
        raise KeyError((size, method))


def _csv_field(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def run_study(spec: ModelSpec, sizes, reps: int, lambda_policy="cv", seed: int = 0,
              jobs: int = 1, cv_folds: int = 5, level: float = 0.95,
              oracle_draws: int = 2_000_000, grid_size: int = 50,
              grid_ratio: float = 1e-3, max_failure_rate: float = 0.02,
              cv_rule=None, progress=None) -> MetricsTable:
    """Run ``reps`` replicates per size and aggregate the comparison metrics.

    Replicates use independent seed substreams keyed by (seed, size, rep), so
    results do not depend on execution order or on ``jobs``.  Replicates whose
    solver fails are excluded and counted; a cell whose failure share exceeds
    ``max_failure_rate`` is flagged in its rows.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    rows = []
    for size in sizes:
        theta_star, oracle_se = oracle_theta(spec, draws=oracle_draws,
                                             seed=[seed, size, 9999])
        args = [(spec, size, rep, seed, lambda_policy, cv_folds, level,
                 grid_size, grid_ratio, cv_rule) for rep in range(reps)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_replicate_star, args, chunksize=4))
        else:
            results = [_replicate_star(a) for a in args]
        if progress is not None:
            progress(spec, size, results)

        failures = sum(1 for res in results if "error" in res)
        ok = [res for res in results if "error" not in res]
        if not ok:
            first = next(res["error"] for res in results if "error" in res)
            raise SolverError(
                f"every replicate failed for size={size} (first error: {first})"
            )
        flagged = failures > max_failure_rate * reps
        if spec.sizing == "total":
            n_primary, n_total = "", size  # primary count is random per draw
        elif spec.sizing == "fixed-external":
            n_primary, n_total = size, size + spec.external_m
        else:
            n_primary, n_total = size, size + int(round(spec.external_ratio * size))
        for method in METHODS:
            vals = np.array([res[method] for res in ok])  # theta, se, lo, hi, V
            theta, se, lo, hi, v = (vals[:, k] for k in range(5))
            rows.append({
                "model": spec.model,
                "d": spec.d,
                "size": size,
                "n_primary": n_primary,
                "N_total": n_total,
                "method": method,
                "bias": float(theta.mean() - theta_star),
                "sd": float(theta.std(ddof=1)),
                "mean_se": float(se.mean()),
                "coverage": float(((lo <= theta_star) & (theta_star <= hi)).mean()),
                "are": float(v.mean() / np.array([res["nv"][4] for res in ok]).mean()),
                "theta_star": theta_star,
                "oracle_se": oracle_se,
                "reps_used": len(ok),
                "failures": failures,
                "flagged": flagged,
            })
    config = {"model": spec.model, "d": spec.d, "sizing": spec.sizing,
              "external_m": spec.external_m, "external_ratio": spec.external_ratio,
              "sizes": list(sizes), "reps": reps, "lambda_policy":
              lambda_policy if isinstance(lambda_policy, str) else list(lambda_policy),
              "cv_folds": cv_folds,
              "cv_rule": "default" if cv_rule is None else cv_rule,
              "level": level,
              "seed": seed, "oracle_draws": oracle_draws}
    return MetricsTable(rows=rows, reps=reps, mc_seed=seed, config=config)


def _replicate_star(args):
    return _replicate(*args)


# Benchmark grids: (spec factory, sizes) per published comparison table.
TABLE_PRESETS = {
    2: ("M1", [1000, 2000, 3000], [4, 150, 1000]),
    3: ("M2i", [400, 800, 1200], [4, 100, 1000]),
    4: ("M2ii", [400, 800, 1200], [4, 150, 1000]),
    5: ("M2iii", [400, 800, 1200], [4, 150, 1000]),
}


def table_preset(table: int) -> list[tuple[ModelSpec, list[int]]]:
    """Grid of (spec, sizes) pairs reproducing one benchmark table."""
    try:
        model, sizes, dims = TABLE_PRESETS[table]
    except KeyError:
        raise ValueError(f"no preset for table {table}") from None
    out = []
    for d in dims:
        if model == "M1":
            out.append((ModelSpec.model1(d), sizes))
        else:
            out.append((ModelSpec.model2(model[2:], d), sizes))
    return out
