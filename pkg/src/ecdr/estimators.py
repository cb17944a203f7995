"""Treatment-effect point estimators, influence vectors, and inference.

Three estimators of the average effect of treatment on the treated are
computed from the four fitted nuisance models:

* ``nv``   uses primary-study rows only (external controls never enter);
* ``eff``  pools external controls through the calibrated odds weights;
* ``safe`` is the variance-minimizing convex-in-spirit combination
  a*eff + (1-a)*nv, where the data-driven weight ``a`` is the least-squares
  projection coefficient of the two influence vectors and is deliberately
  not clipped to [0, 1].

Variances come from the empirical second moments of the influence vectors on
the combined-sample scale; standard errors are sqrt(V/N).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .dataset import CombinedDataset
from .solver import LINPRED_CAP, CoefficientVector, NuisanceFits

# Below this threshold the two influence vectors are numerically identical
# and the combination weight is undefined.
DEGENERATE_TOL = 1e-12


class EstimatorError(Exception):
    pass


class OverflowGuard(EstimatorError):
    """An odds weight exp(x'c) exceeded the linear-predictor guard."""

    def __init__(self, what: str, row: int):
        super().__init__(f"{what}: odds weight overflows the guard at row {row}")
        self.row = row


class DegenerateDenominator(EstimatorError):
    """The influence vectors coincide; the combination weight is undefined."""


def _values(coef) -> np.ndarray:
    if isinstance(coef, CoefficientVector):
        return coef.values
    return np.asarray(coef, dtype=float)


def _guarded_odds(data, selector, coef, what):
    """exp(x'c) where selector > 0, zero elsewhere; guards against overflow."""
    eta = data.x @ _values(coef)
    live = selector > 0
    over = live & (eta > LINPRED_CAP)
    if np.any(over):
        raise OverflowGuard(what, int(np.nonzero(over)[0][0]))
    return np.where(live, np.exp(np.minimum(eta, LINPRED_CAP)), 0.0)


def theta_eff(data: CombinedDataset, alpha_eff, gamma) -> float:
    """Pooled-sample estimate: treated residuals minus odds-weighted control residuals.

    Residuals are y - x'alpha_eff; control-type rows (everything that is not a
    treated primary row) are weighted by exp(x'gamma); the denominator is the
    treated count.
    """
    rt = data.r * data.t
    resid = data.y - data.x @ _values(alpha_eff)
    w = _guarded_odds(data, 1.0 - rt, gamma, "theta_eff")
    num = float((rt * resid).sum() - ((1.0 - rt) * w * resid).sum())
    return num / float(rt.sum())


def theta_nv(data: CombinedDataset, alpha_nv, beta) -> float:
    """Primary-only estimate; external rows contribute nothing by construction."""
    r, t = data.r, data.t
    resid = data.y - data.x @ _values(alpha_nv)
    w = _guarded_odds(data, r * (1.0 - t), beta, "theta_nv")
    num = float((r * t * resid).sum() - (r * (1.0 - t) * w * resid).sum())
    return num / float((r * t).sum())


@dataclass(frozen=True)
class InfluenceVectors:
    """Per-subject influence values on the combined-sample scale.

    ``phi_nv`` is zero for external rows; both vectors average to zero when
    the plugged theta values are the corresponding point estimates.
    """

    phi_nv: np.ndarray
    phi_eff: np.ndarray
    theta_nv: float
    theta_eff: float
    pi_hat: float
    p_hat: float


def influence_vectors(data: CombinedDataset, fits: NuisanceFits,
                      theta_nv: float, theta_eff: float) -> InfluenceVectors:
    """Evaluate both influence vectors at the fitted nuisances and given thetas."""
    r, t, y, x = data.r, data.t, data.y, data.x
    rt = r * t
    pi_hat, p_hat = data.pi_hat, data.p_hat

    res_e = y - x @ fits.alpha_eff.coefficients.values
    w_g = _guarded_odds(data, 1.0 - rt, fits.gamma.coefficients, "phi_eff")
    phi_eff = (rt * (res_e - theta_eff) - (1.0 - rt) * w_g * res_e) / (pi_hat * p_hat)

    res_n = y - x @ fits.alpha_nv.coefficients.values
    w_b = _guarded_odds(data, r * (1.0 - t), fits.beta.coefficients, "phi_nv")
    phi_nv = (r / pi_hat) * (t * (res_n - theta_nv) - (1.0 - t) * w_b * res_n) / p_hat

    return InfluenceVectors(phi_nv=phi_nv, phi_eff=phi_eff, theta_nv=theta_nv,
                            theta_eff=theta_eff, pi_hat=pi_hat, p_hat=p_hat)


def estimate_a(iv: InfluenceVectors) -> float:
    """Least-squares weight placed on the pooled estimator.

    This is mean((phi_nv - phi_eff) * phi_nv) / mean((phi_nv - phi_eff)^2),
    the projection coefficient that minimizes the combination variance.  It
    may fall outside [0, 1]; clipping it would invalidate the variance
    formula, so it is returned as is.
    """
    diff = iv.phi_nv - iv.phi_eff
    denom = float(diff @ diff) / diff.size
    if denom < DEGENERATE_TOL:
        raise DegenerateDenominator(
            f"mean squared influence difference {denom:.3e} below {DEGENERATE_TOL:.0e}"
        )
    return float(diff @ iv.phi_nv) / diff.size / denom


def theta_safe(theta_eff: float, theta_nv: float, a_hat: float) -> float:
    """Combination estimate a*eff + (1-a)*nv."""
    return a_hat * theta_eff + (1.0 - a_hat) * theta_nv


@dataclass
class EstimateReport:
    """Point estimate, influence-based variance, and confidence interval."""

    method: str
    theta: float
    variance: float  # V_hat / N, squared outcome units
    std_error: float
    ci_lower: float
    ci_upper: float
    level: float
    are_vs_nv: float
    a_hat: float | None = None
    components: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "method": self.method,
            "theta": self.theta,
            "std_error": self.std_error,
            "ci": [self.ci_lower, self.ci_upper],
            "level": self.level,
            "a_hat": self.a_hat,
            "are_vs_nv": self.are_vs_nv,
            "components": self.components,
        }
        return out

    def to_csv_row(self) -> dict:
        return {
            "method": self.method,
            "theta": self.theta,
            "std_error": self.std_error,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "level": self.level,
            "a_hat": "" if self.a_hat is None else self.a_hat,
            "are_vs_nv": self.are_vs_nv,
        }


def normal_quantile(q: float) -> float:
    """Inverse standard-normal CDF (rational-approximation implementation)."""
    return float(ndtri(q))


def infer(data: CombinedDataset, fits: NuisanceFits, level: float = 0.95,
          clip_a: bool = False) -> dict[str, EstimateReport]:
    """Compute all three estimates with variances and confidence intervals.

    Returns reports keyed "nv", "eff", "safe".  When the two influence
    vectors coincide the combination weight defaults to 1 and the safe report
    duplicates the pooled one.  ``clip_a`` restricts the combination weight to
    [0, 1]; this is off by default because the unclipped weight is what the
    variance theory describes.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    th_eff = theta_eff(data, fits.alpha_eff.coefficients, fits.gamma.coefficients)
    th_nv = theta_nv(data, fits.alpha_nv.coefficients, fits.beta.coefficients)
    iv = influence_vectors(data, fits, th_nv, th_eff)
    N = data.N

    v_eff = float(iv.phi_eff @ iv.phi_eff) / N
    v_nv = float(iv.phi_nv @ iv.phi_nv) / N

    diff = iv.phi_nv - iv.phi_eff
    msq = float(diff @ diff) / N
    if msq < DEGENERATE_TOL:
        a_hat = 1.0
        v_a = v_eff
        th_safe = th_eff
    else:
        a_hat = float(diff @ iv.phi_nv) / N / msq
        if clip_a:
            a_hat = min(max(a_hat, 0.0), 1.0)
            combo = a_hat * iv.phi_eff + (1.0 - a_hat) * iv.phi_nv
            v_a = float(combo @ combo) / N
        else:
            v_a = v_nv - (float(diff @ iv.phi_nv) / N) ** 2 / msq
        th_safe = theta_safe(th_eff, th_nv, a_hat)

    z = normal_quantile(0.5 + level / 2.0)
    components = {"theta_nv": th_nv, "theta_eff": th_eff,
                  "V_nv": v_nv, "V_eff": v_eff, "V_a": v_a}

    def report(method, theta, v, a=None):
        se = float(np.sqrt(v / N))
        return EstimateReport(
            method=method, theta=theta, variance=v / N, std_error=se,
            ci_lower=theta - z * se, ci_upper=theta + z * se, level=level,
            are_vs_nv=v / v_nv, a_hat=a, components=dict(components),
        )

    return {
        "nv": report("nv", th_nv, v_nv),
        "eff": report("eff", th_eff, v_eff),
        "safe": report("safe", th_safe, v_a, a=a_hat),
    }
