"""L1-penalized convex solvers for the four nuisance-model objectives.

Two loss families are supported, both normalized by the total row count N and
both leaving the intercept unpenalized:

* exp-tilt:     (1/N) sum_i { e_i * exp(x_i'c) - l_i * x_i'c } + lam * |c_-0|_1
* weighted-ls:  (1/2N) sum_i w_i (y_i - x_i'c)^2            + lam * |c_-0|_1

The exp-tilt losses calibrate odds weights so that weighted moment sums of the
"control-type" rows match the treated-row moments exactly at a stationary
point; the weighted-ls losses fit the control outcome mean under those odds
weights.  Exp-tilt problems are solved by proximal gradient descent (ISTA)
with backtracking line search, weighted-ls by cyclic coordinate descent with
soft thresholding and an active-set strategy.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .dataset import CombinedDataset, standardize

# Hard cap on |x'c| inside exp terms.  The exponential loss is unbounded below
# under separation; a line search pinned against this cap signals divergence.
LINPRED_CAP = 40.0

# Per-fit CV selection rules.  The pooled odds calibration (gamma) uses the
# one-standard-error rule: under covariate shift its held-out loss keeps
# improving toward the separation regime, and the conservative pick is what
# the estimators' variance behavior is calibrated against.  The within-primary
# fits use the plain CV minimum.
DEFAULT_CV_RULE = {"gamma": "1se", "beta": "min", "alpha_eff": "min",
                   "alpha_nv": "min"}

_MIN_STEP = 1e-15
_STEP_EXPAND = 1.25


class SolverError(Exception):
    """Base class for optimization failures."""


class DivergentObjective(SolverError):
    """The penalized objective is unbounded below (e.g. separated data)."""


class FoldInfeasible(SolverError):
    """A nonempty (r, t) cell has fewer rows than the requested fold count."""


class NuisanceFitError(SolverError):
    """One of the four nuisance fits failed; ``fit_name`` says which."""

    def __init__(self, fit_name: str, cause: Exception):
        super().__init__(f"{fit_name} fit failed: {cause}")
        self.fit_name = fit_name


@dataclass(frozen=True)
class CoefficientVector:
    """Dense coefficient vector of length d+1; index 0 is the intercept."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.values != 0.0)[0]

    def __len__(self):
        return self.values.shape[0]


@dataclass
class FitResult:
    """Solution of one penalized problem plus solver diagnostics."""

    coefficients: CoefficientVector
    lam: float
    objective_trace: np.ndarray
    converged: bool
    iterations: int
    kkt_violation: float

    def to_json_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.values.tolist(),
            "lambda": self.lam,
            "objective": float(self.objective_trace[-1]),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "kkt_violation": float(self.kkt_violation),
            "support_size": int(self.coefficients.support.size),
        }


@dataclass
class NuisanceFits:
    """The four fitted nuisance models in the order they are computed."""

    gamma: FitResult
    beta: FitResult
    alpha_eff: FitResult
    alpha_nv: FitResult
    lambdas: dict[str, float] = field(default_factory=dict)

    def __iter__(self):
        yield from (("gamma", self.gamma), ("beta", self.beta),
                    ("alpha_eff", self.alpha_eff), ("alpha_nv", self.alpha_nv))

    def all_converged(self) -> bool:
        return all(fit.converged for _, fit in self)


@dataclass(frozen=True)
class PenalizedProblem:
    """One L1-penalized objective over an N x (d+1) design.

    ``kind`` selects the loss: "exp_tilt" uses ``exp_selector``/``lin_selector``
    (per-row 0/1 weights on the exponential and linear terms), "weighted_ls"
    uses ``ls_weights`` and ``response``.  ``penalty_mask`` is False at the
    intercept (index 0).
    """

    kind: str
    design: np.ndarray
    lam: float
    penalty_mask: np.ndarray
    exp_selector: np.ndarray | None = None
    lin_selector: np.ndarray | None = None
    ls_weights: np.ndarray | None = None
    response: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("exp_tilt", "weighted_ls"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.penalty_mask[0]:
            raise ValueError("the intercept (index 0) must be unpenalized")
        if self.kind == "exp_tilt":
            if self.exp_selector is None or self.lin_selector is None:
                raise ValueError("exp_tilt requires exp_selector and lin_selector")
            if self.exp_selector.sum() < 1 or self.lin_selector.sum() < 1:
                raise ValueError("exp_tilt needs at least one row on each loss term")
        else:
            if self.ls_weights is None or self.response is None:
                raise ValueError("weighted_ls requires ls_weights and response")
            if np.any(self.ls_weights < 0):
                raise ValueError("ls_weights must be nonnegative")
            if np.count_nonzero(self.ls_weights) < 1:
                raise ValueError("weighted_ls needs at least one positive weight")

    # -- basic quantities ------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.design.shape[0]

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]

    @property
    def effective_rows(self) -> int:
        if self.kind == "exp_tilt":
            return int(np.count_nonzero((self.exp_selector > 0) | (self.lin_selector > 0)))
        return int(np.count_nonzero(self.ls_weights > 0))

    def smooth_objective(self, values: np.ndarray) -> float:
        """Unpenalized loss at ``values`` (also the CV validation loss)."""
        eta = self.design @ values
        if self.kind == "exp_tilt":
            e, l = self.exp_selector, self.lin_selector
            ee = np.where(e > 0, np.exp(np.minimum(eta, LINPRED_CAP)), 0.0)
            return float(e @ ee - l @ eta) / self.n_rows
        resid = self.response - eta
        return 0.5 * float(self.ls_weights @ (resid * resid)) / self.n_rows

    def objective(self, values: np.ndarray) -> float:
        pen = self.lam * float(np.abs(values[self.penalty_mask]).sum())
        return self.smooth_objective(values) + pen

    def gradient(self, values: np.ndarray) -> np.ndarray:
        eta = self.design @ values
        if self.kind == "exp_tilt":
            e, l = self.exp_selector, self.lin_selector
            u = np.where(e > 0, e * np.exp(np.minimum(eta, LINPRED_CAP)), 0.0) - l
            return (self.design.T @ u) / self.n_rows
        resid = self.response - eta
        return -(self.design.T @ (self.ls_weights * resid)) / self.n_rows

    def intercept_only_start(self) -> np.ndarray:
        """Exact minimizer over the intercept with all slopes held at zero."""
        c = np.zeros(self.n_coef)
        if self.kind == "exp_tilt":
            c[0] = np.log(self.lin_selector.sum() / self.exp_selector.sum())
        else:
            wsum = self.ls_weights.sum()
            c[0] = float(self.ls_weights @ self.response) / wsum
        return c

    def lambda_max(self) -> float:
        """Smallest lambda whose solution is intercept-only."""
        g = self.gradient(self.intercept_only_start())
        return float(np.abs(g[self.penalty_mask]).max())

    def default_grid(self, n_points: int = 50, ratio: float = 1e-3) -> np.ndarray:
        """Log-spaced grid from lambda_max down to ratio * lambda_max."""
        lam_max = max(self.lambda_max(), 1e-12)
        return lam_max * np.logspace(0.0, np.log10(ratio), n_points)

    def with_lambda(self, lam: float) -> "PenalizedProblem":
        return dataclasses.replace(self, lam=lam)

    def restrict(self, rows: np.ndarray) -> "PenalizedProblem":
        """Sub-problem over a row subset (normalization follows the subset)."""
        pick = lambda a: None if a is None else a[rows]
        return PenalizedProblem(
            kind=self.kind,
            design=self.design[rows],
            lam=self.lam,
            penalty_mask=self.penalty_mask,
            exp_selector=pick(self.exp_selector),
            lin_selector=pick(self.lin_selector),
            ls_weights=pick(self.ls_weights),
            response=pick(self.response),
        )


def _soft_threshold(z, thr):
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def _kkt_stat(values, grad, lam, mask):
    """Max violation of the subgradient stationarity conditions."""
    viol = np.abs(grad).astype(float)
    pen = mask & (values != 0.0)
    viol[pen] = np.abs(grad[pen] + lam * np.sign(values[pen]))
    zero = mask & (values == 0.0)
    viol[zero] = np.maximum(np.abs(grad[zero]) - lam, 0.0)
    return float(viol.max())


def _ista_exp_tilt(X, e, l, lam, mask, x0, kkt_tol, rel_obj_tol, max_iter):
    """Proximal gradient with backtracking for the exp-tilt loss."""
    N = X.shape[0]
    act = (e > 0) | (l > 0)
    Xa = np.ascontiguousarray(X[act])
    ea = e[act]
    Xl_mean = (X.T @ l) / N

    def smooth(eta_a, c):
        return float(ea @ np.exp(eta_a)) / N - float(Xl_mean @ c)

    def penalty(c):
        return lam * float(np.abs(c[mask]).sum())

    c = x0.copy()
    eta_a = Xa @ c
    if eta_a.size and np.abs(eta_a).max() > LINPRED_CAP:
        raise DivergentObjective("start violates the linear-predictor guard")
    f_sm = smooth(eta_a, c)
    trace = [f_sm + penalty(c)]
    step = 1.0
    converged = False
    kkt = np.inf
    it = 0
    while it < max_iter:
        it += 1
        u = ea * np.exp(eta_a)
        g = (Xa.T @ u) / N - Xl_mean
        kkt = _kkt_stat(c, g, lam, mask)
        if kkt <= kkt_tol:
            converged = True
            break
        # backtracking prox step
        cap_blocked = False
        while True:
            cand = c - step * g
            cand[mask] = _soft_threshold(cand[mask], step * lam)
            delta = cand - c
            eta_cand = Xa @ cand
            if eta_cand.size and np.abs(eta_cand).max() > LINPRED_CAP:
                cap_blocked = True
                step *= 0.5
                if step < _MIN_STEP:
                    raise DivergentObjective(
                        "line search pinned against the linear-predictor guard; "
                        "the objective appears unbounded (separated data?)"
                    )
                continue
            f_cand = smooth(eta_cand, cand)
            quad = f_sm + float(g @ delta) + float(delta @ delta) / (2.0 * step)
            if f_cand <= quad + 1e-12:
                break
            step *= 0.5
            if step < _MIN_STEP:
                if cap_blocked:
                    raise DivergentObjective(
                        "line search pinned against the linear-predictor guard"
                    )
                # numerically stalled; keep the current iterate
                cand, eta_cand, f_cand = c, eta_a, f_sm
                break
        c, eta_a, f_sm = cand, eta_cand, f_cand
        trace.append(f_sm + penalty(c))
        step *= _STEP_EXPAND
    return c, np.asarray(trace), it, converged, kkt


def _cd_weighted_ls(X, w, y, lam, mask, x0, kkt_tol, rel_obj_tol, max_iter):
    """Cyclic coordinate descent with soft thresholding and active sweeps."""
    N, p = X.shape
    Xw = X * w[:, None]
    denom = np.einsum("ij,ij->j", Xw, X) / N
    free = denom > 0.0
    c = np.where(free, x0, 0.0)
    resid = y - X @ c

    def objective(resid, c):
        f = 0.5 * float(w @ (resid * resid)) / N
        return f + lam * float(np.abs(c[mask]).sum())

    def sweep(coords):
        for j in coords:
            if not free[j]:
                continue
            z = float(Xw[:, j] @ resid) / N + denom[j] * c[j]
            if mask[j]:
                new = _soft_threshold(z, lam) / denom[j]
            else:
                new = z / denom[j]
            diff = new - c[j]
            if diff != 0.0:
                resid[:] -= diff * X[:, j]
                c[j] = new

    trace = [objective(resid, c)]
    sweeps = 0
    converged = False
    kkt = np.inf
    all_coords = range(p)
    while sweeps < max_iter:
        sweeps += 1
        sweep(all_coords)
        f = objective(resid, c)
        trace.append(f)
        active = np.nonzero((c != 0.0) & free)[0]
        prev = f
        while sweeps < max_iter:
            sweeps += 1
            sweep(active)
            f = objective(resid, c)
            trace.append(f)
            if prev - f <= rel_obj_tol * max(1.0, abs(f)):
                break
            prev = f
        g = -(Xw.T @ resid) / N
        kkt = _kkt_stat(c, g, lam, mask)
        if kkt <= kkt_tol:
            converged = True
            break
    return c, np.asarray(trace), sweeps, converged, kkt


def minimize_l1(problem: PenalizedProblem, tol: float = 1e-6, max_iter: int = 10000,
                rel_obj_tol: float = 1e-9, x0: np.ndarray | None = None) -> FitResult:
    """Minimize one penalized problem to a KKT-certified stationary point.

    ``tol`` bounds the returned ``kkt_violation`` when ``converged`` is True.
    If ``max_iter`` is exhausted first, the best iterate is returned with
    ``converged=False`` rather than raising.

    Raises
    ------
    DivergentObjective
        If the line search is pinned against the linear-predictor overflow
        guard, which signals an unbounded objective (e.g. separated data).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = problem.intercept_only_start() if x0 is None else np.asarray(x0, dtype=float).copy()
    if problem.kind == "exp_tilt":
        c, trace, its, conv, kkt = _ista_exp_tilt(
            problem.design, problem.exp_selector, problem.lin_selector,
            problem.lam, problem.penalty_mask, start, tol, rel_obj_tol, max_iter,
        )
    else:
        c, trace, its, conv, kkt = _cd_weighted_ls(
            problem.design, problem.ls_weights, problem.response,
            problem.lam, problem.penalty_mask, start, tol, rel_obj_tol, max_iter,
        )
    return FitResult(
        coefficients=CoefficientVector(c),
        lam=problem.lam,
        objective_trace=trace,
        converged=conv,
        iterations=its,
        kkt_violation=kkt,
    )


def solve_path(problem: PenalizedProblem, lambdas, tol: float = 1e-6,
               max_iter: int = 10000, rel_obj_tol: float = 1e-9) -> list[FitResult]:
    """Solve along a descending lambda path with warm starts.

    Returns fits aligned with ``lambdas`` in the given order.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    order = np.argsort(-lambdas)
    fits: list[FitResult | None] = [None] * lambdas.size
    warm = problem.intercept_only_start()
    for pos in order:
        fit = minimize_l1(problem.with_lambda(float(lambdas[pos])), tol=tol,
                          max_iter=max_iter, rel_obj_tol=rel_obj_tol, x0=warm)
        warm = fit.coefficients.values
        fits[pos] = fit
    return fits


# -- the four nuisance objectives ----------------------------------------


def _default_mask(p):
    mask = np.ones(p, dtype=bool)
    mask[0] = False
    return mask


def gamma_problem(data: CombinedDataset, lam: float = 0.0) -> PenalizedProblem:
    """Odds calibration of treated rows against all control-type rows."""
    rt = data.r * data.t
    return PenalizedProblem(
        kind="exp_tilt", design=data.x, lam=lam,
        penalty_mask=_default_mask(data.d + 1),
        exp_selector=1.0 - rt, lin_selector=rt,
    )


def beta_problem(data: CombinedDataset, lam: float = 0.0) -> PenalizedProblem:
    """Odds calibration of treated rows against primary-study controls only."""
    rt = data.r * data.t
    return PenalizedProblem(
        kind="exp_tilt", design=data.x, lam=lam,
        penalty_mask=_default_mask(data.d + 1),
        exp_selector=data.r * (1.0 - data.t), lin_selector=rt,
    )


def _odds_weights(data, selector, values, what):
    eta = data.x @ np.asarray(values, dtype=float)
    live = selector > 0
    if np.any(eta[live] > LINPRED_CAP):
        row = int(np.nonzero(live & (eta > LINPRED_CAP))[0][0])
        raise DivergentObjective(
            f"{what}: odds weight overflows the guard at row {row}"
        )
    return np.where(live, selector * np.exp(np.minimum(eta, LINPRED_CAP)), 0.0)


def alpha_eff_problem(data: CombinedDataset, lam: float,
                      gamma_values: np.ndarray) -> PenalizedProblem:
    """Outcome regression over all control-type rows, odds-weighted by gamma."""
    sel = 1.0 - data.r * data.t
    return PenalizedProblem(
        kind="weighted_ls", design=data.x, lam=lam,
        penalty_mask=_default_mask(data.d + 1),
        ls_weights=_odds_weights(data, sel, gamma_values, "alpha_eff"),
        response=data.y,
    )


def alpha_nv_problem(data: CombinedDataset, lam: float,
                     beta_values: np.ndarray) -> PenalizedProblem:
    """Outcome regression over primary controls only, odds-weighted by beta."""
    sel = data.r * (1.0 - data.t)
    return PenalizedProblem(
        kind="weighted_ls", design=data.x, lam=lam,
        penalty_mask=_default_mask(data.d + 1),
        ls_weights=_odds_weights(data, sel, beta_values, "alpha_nv"),
        response=data.y,
    )


# -- cross-validation ------------------------------------------------------


def stratified_folds(r: np.ndarray, t: np.ndarray, folds: int, seed) -> list[np.ndarray]:
    """Validation-index sets stratified by the (r, t) cell.

    Every nonempty cell is spread across all folds; a nonempty cell smaller
    than the fold count cannot be spread and raises FoldInfeasible.  Empty
    cells (e.g. no external rows) are skipped.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(r.shape[0], dtype=int)
    for cell_r, cell_t in ((1, 1), (1, 0), (0, 0)):
        idx = np.nonzero((r == cell_r) & (t == cell_t))[0]
        if idx.size == 0:
            continue
        if idx.size < folds:
            raise FoldInfeasible(
                f"(r={cell_r}, t={cell_t}) cell has {idx.size} rows < {folds} folds"
            )
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return [np.nonzero(assignment == k)[0] for k in range(folds)]


def select_lambda_cv(data: CombinedDataset, problem_builder, folds: int = 5,
                     grid=None, seed=0, tol: float = 1e-6,
                     max_iter: int = 10000, rule: str = "min",
                     path_tol: float = 1e-5,
                     path_max_iter: int = 1500) -> float:
    """Pick a grid lambda by stratified K-fold held-out unpenalized loss.

    ``problem_builder`` maps a CombinedDataset to the PenalizedProblem whose
    loss is being tuned (row-aligned with ``data``).  Folds are stratified by
    the (r, t) cell.  With ``rule="min"`` the average-loss minimizer is
    returned, exact ties breaking toward the larger lambda; ``rule="1se"``
    returns the largest lambda whose average loss is within one standard
    error (across folds) of the minimum.  Fold fits only rank candidate
    lambdas, so they run under the looser ``path_tol``/``path_max_iter``
    budget; the caller's final fit uses the certified tolerances.
    """
    if rule not in ("min", "1se"):
        raise ValueError(f"unknown CV rule {rule!r}")
    problem = problem_builder(data)
    if grid is None:
        grid = problem.default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(grid < 0):
        raise ValueError("lambda grid must be nonnegative")
    if np.any(grid == 0) and problem.n_coef >= problem.effective_rows:
        raise ValueError("lambda 0 is only admissible when d+1 < effective rows")
    if grid.size == 1:
        return float(grid[0])

    val_sets = stratified_folds(data.r, data.t, folds, seed)
    desc = np.sort(grid)[::-1]
    losses = np.full((folds, desc.size), np.inf)
    all_rows = np.arange(data.N)
    for k, val_idx in enumerate(val_sets):
        train_mask = np.ones(data.N, dtype=bool)
        train_mask[val_idx] = False
        train_prob = problem.restrict(all_rows[train_mask])
        val_prob = problem.restrict(val_idx)
        # walk the path by hand: a diverging grid point truncates the path
        # (that lambda and everything below it are infeasible on this fold)
        warm = train_prob.intercept_only_start()
        for i, lam in enumerate(desc):
            try:
                fit = minimize_l1(train_prob.with_lambda(float(lam)), tol=path_tol,
                                  max_iter=path_max_iter, x0=warm)
            except DivergentObjective:
                break
            warm = fit.coefficients.values
            losses[k, i] = val_prob.smooth_objective(warm)
    mean_loss = losses.mean(axis=0)
    if not np.isfinite(mean_loss).any():
        raise DivergentObjective("every grid lambda diverged on some fold")
    best = int(np.argmin(mean_loss))  # argmin takes the first, i.e. largest, lambda
    if rule == "1se":
        se_best = losses[:, best].std(ddof=1) / np.sqrt(folds)
        within = np.nonzero(mean_loss <= mean_loss[best] + se_best)[0]
        best = int(within[0])  # largest lambda within one SE of the minimum
    return float(desc[best])


# -- the four-fit pipeline -------------------------------------------------


def _finalize(fit: FitResult, scaling) -> FitResult:
    """Map a fit on the scaled design back to original-scale coefficients."""
    if scaling is None:
        return fit
    values = scaling.map_coefficients_back(fit.coefficients.values.copy())
    return dataclasses.replace(fit, coefficients=CoefficientVector(values))


def fit_nuisances(data: CombinedDataset, lambdas="cv", cv_folds: int = 5,
                  seed=0, grid_size: int = 50, grid_ratio: float = 1e-3,
                  standardize_design: bool = True, tol: float = 1e-6,
                  max_iter: int = 10000, cv_rule=None) -> NuisanceFits:
    """Fit the four nuisance models in their required order.

    The two odds calibrations are fitted first (beta on the primary study,
    gamma on the pooled sample); their fitted odds then weight the two outcome
    regressions.  ``lambdas`` is either "cv" (5-fold stratified CV per
    problem) or a sequence of four fixed values ordered (gamma, beta,
    alpha_eff, alpha_nv).  ``cv_rule`` is "min" or "1se", or a mapping from
    fit name to rule for mixed policies; None means DEFAULT_CV_RULE.
    Non-intercept columns are standardized internally; returned coefficients
    are on the original scale.
    """
    if isinstance(lambdas, str):
        if lambdas != "cv":
            raise ValueError(f"unknown lambda policy {lambdas!r}")
        fixed = None
    else:
        fixed = [float(v) for v in lambdas]
        if len(fixed) != 4:
            raise ValueError("expected four lambda values (gamma, beta, alpha_eff, alpha_nv)")
    if cv_rule is None:
        rules = dict(DEFAULT_CV_RULE)
    elif isinstance(cv_rule, str):
        rules = {name: cv_rule for name in ("gamma", "beta", "alpha_eff", "alpha_nv")}
    else:
        rules = dict(cv_rule)

    if standardize_design:
        sdata, scaling = standardize(data)
    else:
        sdata, scaling = data, None

    fits: dict[str, FitResult] = {}
    chosen: dict[str, float] = {}
    internal: dict[str, np.ndarray] = {}

    builders = {
        "gamma": lambda d: gamma_problem(d, 0.0),
        "beta": lambda d: beta_problem(d, 0.0),
        "alpha_eff": lambda d: alpha_eff_problem(d, 0.0, internal["gamma"]),
        "alpha_nv": lambda d: alpha_nv_problem(d, 0.0, internal["beta"]),
    }
    for i, name in enumerate(("gamma", "beta", "alpha_eff", "alpha_nv")):
        try:
            builder = builders[name]
            if fixed is None:
                problem = builder(sdata)
                grid = problem.default_grid(grid_size, grid_ratio)
                lam = select_lambda_cv(sdata, builder, folds=cv_folds, grid=grid,
                                       seed=seed, tol=tol, max_iter=max_iter,
                                       rule=rules[name])
                # cheap warm path down to the selected lambda, then one
                # certified solve at the selected value
                warm = problem.intercept_only_start()
                for lam_k in grid[grid > lam]:
                    warm = minimize_l1(problem.with_lambda(float(lam_k)),
                                       tol=1e-5, max_iter=1500,
                                       x0=warm).coefficients.values
                fit = minimize_l1(problem.with_lambda(lam), tol=tol,
                                  max_iter=max_iter, x0=warm)
            else:
                lam = fixed[i]
                problem = builder(sdata).with_lambda(lam)
                fit = solve_path(problem, [lam], tol=tol, max_iter=max_iter)[0]
        except SolverError as exc:
            raise NuisanceFitError(name, exc) from exc
        chosen[name] = lam
        internal[name] = fit.coefficients.values
        fits[name] = _finalize(fit, scaling)

    return NuisanceFits(gamma=fits["gamma"], beta=fits["beta"],
                        alpha_eff=fits["alpha_eff"], alpha_nv=fits["alpha_nv"],
                        lambdas=chosen)
