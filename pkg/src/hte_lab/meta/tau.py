"""Backfitting estimator for y = mu(x) + tau(x) z + e with separately regularised parts."""

from __future__ import annotations

import numpy as np

from ..data import CausalDataset, as_generator
from ..learners import LearnerSpec, fit
from .base import CateModel, DivergenceError, check_arms, resolve_propensity

DEFAULT_MU = LearnerSpec("forest", {"trees": 100, "max_depth": 5})


def default_tau_spec(base_mu: LearnerSpec) -> LearnerSpec:
    """Effect learner regularised more strongly than the prognostic learner.

    Tree families drop to depth 2; penalised linear fits take ten times the
    penalty (or stay CV-tuned when the penalty is unset).
    """
    if base_mu.family in ("tree", "forest", "boosting"):
        return base_mu.replace(max_depth=min(2, base_mu["max_depth"]))
    if base_mu.family == "linear" and base_mu["penalty"] != "none" and base_mu["lam"] is not None:
        return base_mu.replace(lam=10.0 * base_mu["lam"])
    return base_mu


class TauLearner(CateModel):
    family = "TAU"

    def __init__(self, mu_model, tau_model, objective_history, n_features, propensity):
        super().__init__(n_features, propensity, use_ps=True)
        self.mu_model = mu_model
        self.tau_model = tau_model
        self.objective_history = objective_history

    @property
    def sweeps_run(self) -> int:
        return len(self.objective_history)

    def mu(self, X) -> np.ndarray:
        return self.mu_model.predict(self.features(X))

    def predict_outcomes(self, X):
        mu = self.mu(X)
        return mu, mu + self.tau_model.predict(X)

    def _cate(self, X):
        return self.tau_model.predict(X)


def fit_tau_learner(data: CausalDataset, base_mu: LearnerSpec = DEFAULT_MU, base_tau: LearnerSpec | None = None,
                    pi_hat=None, sweeps: int = 20, tol: float = 1e-6, rng=None, propensity=None) -> TauLearner:
    """Alternate a prognostic fit on ``[X, pi_hat]`` and an effect fit on treated units.

    Starts from tau = 0; each sweep fits mu to ``y - tau(x) z`` and then tau to
    ``y - mu(x)`` over the treated arm.  Stops after ``sweeps`` sweeps or once
    the largest change in the fitted tau falls to ``tol``.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    check_arms(data)
    rng = as_generator(rng)
    propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
    base_tau = base_tau or default_tau_spec(base_mu)
    X, y, z = data.covariates, data.outcome, data.treatment
    F = np.column_stack([X, pi_hat])
    t = z == 1
    tau_hat = np.zeros(data.n)
    history = []
    mu_model = tau_model = None
    for _ in range(sweeps):
        mu_model = fit(base_mu, F, y - tau_hat * z, rng=rng)
        mu_hat = mu_model.predict(F)
        tau_model = fit(base_tau, X[t], (y - mu_hat)[t], rng=rng)
        new_tau = tau_model.predict(X)
        if not (np.all(np.isfinite(mu_hat)) and np.all(np.isfinite(new_tau))):
            raise DivergenceError("backfitting produced non-finite predictions")
        history.append(float(np.sum((y - mu_hat - new_tau * z) ** 2)))
        delta = np.max(np.abs(new_tau - tau_hat))
        tau_hat = new_tau
        if delta <= tol:
            break
    return TauLearner(mu_model, tau_model, history, data.d, propensity)
