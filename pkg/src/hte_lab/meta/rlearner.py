"""R-learner: residual-on-residual fit of the effect surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import CausalDataset, as_generator
from ..learners import LearnerSpec, fit, fold_ids
from ..learners.tuning import cross_validate, tuning_grid
from ..propensity import DEFAULT_CLIP, estimate_propensity
from .base import CateModel, check_arms

MIN_RESIDUAL = 1e-6

# Weighted-CV grids for effect learners whose own defaults are fixed.
EFFECT_GRIDS = {
    "boosting": [{"rounds": r} for r in (25, 50, 100, 200)],
    "tree": [{"max_depth": d} for d in (1, 2, 3, 4)],
    "forest": [{"min_leaf": m} for m in (5, 10, 20)],
}


@dataclass(frozen=True)
class RLearnerLossParts:
    residual_outcome: np.ndarray
    residual_treatment: np.ndarray

    @classmethod
    def from_nuisances(cls, y, z, m_hat, pi_hat) -> "RLearnerLossParts":
        return cls(np.asarray(y, float) - np.asarray(m_hat, float),
                   np.asarray(z, float) - np.asarray(pi_hat, float))

    @property
    def usable(self) -> np.ndarray:
        return np.abs(self.residual_treatment) >= MIN_RESIDUAL

    @property
    def weights(self) -> np.ndarray:
        return np.where(self.usable, self.residual_treatment**2, 0.0)

    @property
    def pseudo_target(self) -> np.ndarray:
        safe = np.where(self.usable, self.residual_treatment, 1.0)
        return np.where(self.usable, self.residual_outcome / safe, 0.0)

    def loss(self, tau) -> float:
        """Mean of ((y - m) - (z - pi) tau)^2."""
        r = self.residual_outcome - self.residual_treatment * np.asarray(tau, float)
        return float(np.mean(r * r))

    def weighted_loss(self, tau) -> float:
        """Same loss written as sum of (z - pi)^2 (pseudo_target - tau)^2.

        Excluded units (|z - pi| < 1e-6) contribute their direct term.
        """
        tau = np.broadcast_to(np.asarray(tau, float), self.residual_outcome.shape)
        u = self.usable
        excluded = (self.residual_outcome[~u] - self.residual_treatment[~u] * tau[~u]) ** 2
        return float((self.weights @ (self.pseudo_target - tau) ** 2 + excluded.sum()) / len(tau))


class RLearner(CateModel):
    family = "R"

    def __init__(self, tau_model, m_model, parts, tau_spec, n_features, propensity):
        super().__init__(n_features, propensity, use_ps=False)
        self.tau_model = tau_model
        self.m_model = m_model
        self.parts = parts
        self.tau_spec = tau_spec

    def _cate(self, X):
        return self.tau_model.predict(X)

    def predict_outcomes(self, X):
        m = self.m_model.predict(X)
        tau = self.tau_model.predict(X)
        pi = self.propensity.predict(X)
        return m - pi * tau, m + (1 - pi) * tau


def cross_fit(spec: LearnerSpec, X, y, folds: int, rng) -> np.ndarray:
    ids = fold_ids(len(y), folds, rng)
    out = np.empty(len(y))
    for f in range(folds):
        held = ids == f
        out[held] = fit(spec, X[~held], y[~held], rng=rng).predict(X[held])
    return out


def fit_r_learner(data: CausalDataset, base_tau: LearnerSpec, m_spec: LearnerSpec, folds: int = 5, rng=None,
                  m_hat=None, pi_hat=None, propensity=None, tau_grid=None,
                  clip: tuple[float, float] = DEFAULT_CLIP) -> RLearner:
    """Cross-fitted m(x) and pi(x), then a weighted fit of the pseudo-outcome.

    The effect learner is fit to ``(y - m) / (z - pi)`` with weights
    ``(z - pi)^2``; its tunable hyperparameters are chosen by weighted CV,
    which is CV on the R-loss itself.  Units with ``|z - pi| < 1e-6`` get
    weight zero.  ``m_hat`` / ``pi_hat`` override the cross-fitted nuisances.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    check_arms(data)
    rng = as_generator(rng)
    X, y, z = data.covariates, data.outcome, data.treatment
    if m_hat is None:
        m_hat = cross_fit(m_spec, X, y, folds, rng)
    if propensity is None:
        propensity, estimated = estimate_propensity(data, folds=folds, clip=clip, rng=rng)
        pi_hat = estimated if pi_hat is None else pi_hat
    elif pi_hat is None:
        pi_hat = propensity.predict(X)
    parts = RLearnerLossParts.from_nuisances(y, z, m_hat, pi_hat)
    w, target = parts.weights, parts.pseudo_target
    spec = base_tau
    grid = tau_grid if tau_grid is not None else EFFECT_GRIDS.get(spec.family, [])
    if grid and not tuning_grid(spec, X, target, w):
        spec = spec.replace(**cross_validate(spec, X, target, folds, grid, rng, weights=w))
    tau_model = fit(spec, X, target, weights=w, rng=rng, folds=folds)
    m_model = fit(m_spec, X, y, rng=rng)
    return RLearner(tau_model, m_model, parts, tau_model.spec, data.d, propensity)
