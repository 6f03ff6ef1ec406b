"""Effect-estimation error and validation-set risk estimators.

All risks are squared losses; take the square root at the reporting layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


def _vectors(*arrays, min_len: int = 1):
    out = [np.asarray(a, dtype=float).ravel() for a in arrays]
    n = len(out[0])
    if any(len(a) != n for a in out):
        raise ValueError(f"length mismatch: {[len(a) for a in out]}")
    if n < min_len:
        raise ValueError(f"need at least {min_len} entries, got {n}")
    return out


def _arm_propensity(z, pi_hat):
    """pi for treated units, 1 - pi for controls."""
    p = np.where(z == 1, pi_hat, 1.0 - pi_hat)
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("arm propensities must lie in (0, 1]")
    return p


def pehe(tau_hat, tau_true) -> float:
    tau_hat, tau_true = _vectors(tau_hat, tau_true)
    return float(np.mean((tau_true - tau_hat) ** 2))


def sqrt_pehe(tau_hat, tau_true) -> float:
    return float(np.sqrt(pehe(tau_hat, tau_true)))


def mu_risk(mu_hat, y_obs) -> float:
    """MSE of the arm-specific outcome prediction against the observed outcome."""
    mu_hat, y_obs = _vectors(mu_hat, y_obs)
    return float(np.mean((mu_hat - y_obs) ** 2))


def mu_risk_iptw(mu_hat, y_obs, z, pi_hat) -> float:
    mu_hat, y_obs, z, pi_hat = _vectors(mu_hat, y_obs, z, pi_hat)
    return float(np.mean((mu_hat - y_obs) ** 2 / _arm_propensity(z, pi_hat)))


def tau_risk_plugin(tau_hat_val, tau_tilde_model, X_val) -> float:
    """Squared distance to a reference model fitted on the validation fold."""
    X_val = np.asarray(X_val, dtype=float)
    if X_val.ndim != 2 or len(X_val) == 0:
        raise ValueError("X_val must be a non-empty matrix")
    tau_hat_val, tilde = _vectors(tau_hat_val, tau_tilde_model.predict_cate(X_val))
    return float(np.mean((tau_hat_val - tilde) ** 2))


def ipw_pseudo_outcome(y, z, pi_hat) -> np.ndarray:
    y, z, pi_hat = _vectors(y, z, pi_hat)
    return (2 * z - 1) * y / _arm_propensity(z, pi_hat)


def tau_risk_iptw(tau_hat_val, y_val, z_val, pi_tilde_val) -> float:
    tau_hat_val, y_val, z_val, pi_tilde_val = _vectors(tau_hat_val, y_val, z_val, pi_tilde_val)
    return float(np.mean((tau_hat_val - ipw_pseudo_outcome(y_val, z_val, pi_tilde_val)) ** 2))


def r_loss(tau_hat, y, z, m_hat, pi_hat) -> float:
    tau_hat, y, z, m_hat, pi_hat = _vectors(tau_hat, y, z, m_hat, pi_hat)
    return float(np.mean(((y - m_hat) - (z - pi_hat) * tau_hat) ** 2))


def att(tau, z) -> float:
    tau, z = _vectors(tau, z)
    treated = z == 1
    if not treated.any():
        raise ValueError("no treated units")
    return float(tau[treated].mean())


@dataclass(frozen=True)
class Comparison:
    pearson: float
    spearman: float
    sd_a: float
    sd_b: float
    mean_a: float
    mean_b: float


def compare_cate_estimates(tau_a, tau_b) -> Comparison:
    """Agreement summary between two sets of CATE estimates (sample sds, ddof=1)."""
    tau_a, tau_b = _vectors(tau_a, tau_b, min_len=3)
    sd_a, sd_b = np.std(tau_a, ddof=1), np.std(tau_b, ddof=1)
    # rounding noise on a constant vector (e.g. an S-learner with main effects only) counts as constant
    if sd_a <= 1e-12 * (1 + abs(tau_a.mean())) or sd_b <= 1e-12 * (1 + abs(tau_b.mean())):
        raise ValueError("correlations need non-constant inputs")
    return Comparison(
        pearson=float(stats.pearsonr(tau_a, tau_b)[0]),
        spearman=float(stats.spearmanr(tau_a, tau_b)[0]),
        sd_a=float(sd_a), sd_b=float(sd_b),
        mean_a=float(tau_a.mean()), mean_b=float(tau_b.mean()),
    )


RISKS = {
    "pehe": pehe,
    "mu_risk": mu_risk,
    "mu_risk_iptw": mu_risk_iptw,
    "tau_risk_plugin": tau_risk_plugin,
    "tau_risk_iptw": tau_risk_iptw,
    "r_loss": r_loss,
}
