"""S-, T- and X-learners."""

from __future__ import annotations

import numpy as np

from ..data import CausalDataset, as_generator
from ..learners import LearnerSpec, RegressionModel, fit
from .base import CateModel, check_arms, resolve_propensity


def _design(data: CausalDataset, pi_hat, use_ps: bool) -> np.ndarray:
    return np.column_stack([data.covariates, pi_hat]) if use_ps else data.covariates


class SLearner(CateModel):
    family = "S"

    def __init__(self, model: RegressionModel, n_features, propensity, use_ps):
        super().__init__(n_features, propensity, use_ps)
        self.model = model

    def predict_outcomes(self, X):
        F = self.features(X)
        ones = np.ones((len(F), 1))
        return (self.model.predict(np.hstack([F, 0 * ones])),
                self.model.predict(np.hstack([F, ones])))

    def _cate(self, X):
        mu0, mu1 = self.predict_outcomes(X)
        return mu1 - mu0


def fit_s_learner(data: CausalDataset, base: LearnerSpec, use_ps: bool = True, rng=None,
                  propensity=None, pi_hat=None) -> SLearner:
    """One surface f(x, z) with the treatment as an extra column; tau = f(x,1) - f(x,0)."""
    rng = as_generator(rng)
    if use_ps:
        propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
    F = _design(data, pi_hat, use_ps)
    model = fit(base, np.column_stack([F, data.treatment]), data.outcome, rng=rng)
    return SLearner(model, data.d, propensity, use_ps)


class TLearner(CateModel):
    family = "T"

    def __init__(self, f0, f1, n_features, propensity, use_ps):
        super().__init__(n_features, propensity, use_ps)
        self.f0 = f0
        self.f1 = f1

    def predict_outcomes(self, X):
        F = self.features(X)
        return self.f0.predict(F), self.f1.predict(F)

    def _cate(self, X):
        mu0, mu1 = self.predict_outcomes(X)
        return mu1 - mu0


def _fit_arms(data, F, base0, base1, rng):
    check_arms(data)
    t = data.treatment == 1
    f0 = fit(base0, F[~t], data.outcome[~t], rng=rng)
    f1 = fit(base1, F[t], data.outcome[t], rng=rng)
    return f0, f1


def fit_t_learner(data: CausalDataset, base0: LearnerSpec, base1: LearnerSpec | None = None,
                  use_ps: bool = True, rng=None, propensity=None, pi_hat=None) -> TLearner:
    """Separate surfaces on controls and treated; tau = f1 - f0."""
    rng = as_generator(rng)
    if use_ps:
        propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
    F = _design(data, pi_hat, use_ps)
    f0, f1 = _fit_arms(data, F, base0, base1 or base0, rng)
    return TLearner(f0, f1, data.d, propensity, use_ps)


WEIGHT_MODES = ("propensity", "one", "zero")


class XLearner(CateModel):
    family = "X"

    def __init__(self, f0, f1, tau0, tau1, weight_mode, n_features, propensity, use_ps):
        super().__init__(n_features, propensity, use_ps)
        self.f0, self.f1 = f0, f1
        self.tau0_model, self.tau1_model = tau0, tau1
        self.weight_mode = weight_mode

    def predict_outcomes(self, X):
        F = self.features(X)
        return self.f0.predict(F), self.f1.predict(F)

    def tau0(self, X):
        return self.tau0_model.predict(self.features(X))

    def tau1(self, X):
        return self.tau1_model.predict(self.features(X))

    def g(self, X):
        if self.weight_mode == "one":
            return np.ones(len(X))
        if self.weight_mode == "zero":
            return np.zeros(len(X))
        return self.propensity.predict(X)

    def _cate(self, X):
        g = self.g(X)
        return g * self.tau0(X) + (1 - g) * self.tau1(X)


def fit_x_learner(data: CausalDataset, base: LearnerSpec, pi_hat=None, weight_mode: str = "propensity",
                  use_ps: bool = True, rng=None, propensity=None, tau_base: LearnerSpec | None = None) -> XLearner:
    """Three steps: T-learner, imputed effects per arm, arm-wise effect regressions.

    The final estimate is ``g tau0 + (1 - g) tau1`` with ``g`` the propensity,
    or the constants 1 / 0.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
    rng = as_generator(rng)
    if use_ps or weight_mode == "propensity":
        propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
    F = _design(data, pi_hat, use_ps)
    f0, f1 = _fit_arms(data, F, base, base, rng)
    t = data.treatment == 1
    y = data.outcome
    d1 = y[t] - f0.predict(F[t])
    d0 = f1.predict(F[~t]) - y[~t]
    tau_base = tau_base or base
    tau1 = fit(tau_base, F[t], d1, rng=rng)
    tau0 = fit(tau_base, F[~t], d0, rng=rng)
    return XLearner(f0, f1, tau0, tau1, weight_mode, data.d, propensity, use_ps)
