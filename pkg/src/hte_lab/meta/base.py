from __future__ import annotations

import numpy as np

from ..data import CausalDataset, as_generator
from ..learners.base import DimensionError, check_matrix
from ..propensity import DEFAULT_FOLDS, PropensityModel, estimate_propensity

PS_COLUMN = "ps_hat"
FAMILIES = ("S", "T", "X", "R", "MT", "TAU", "CF")


class ArmTooSmallError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    pass


def augment_with_propensity(data: CausalDataset, pi_hat) -> CausalDataset:
    """Append the propensity estimate as a continuous covariate named ``ps_hat``."""
    return data.append_column(pi_hat, PS_COLUMN)


def resolve_propensity(data: CausalDataset, propensity: PropensityModel | None, pi_hat, rng,
                       folds: int = DEFAULT_FOLDS) -> tuple[PropensityModel, np.ndarray]:
    """Fill in whichever of (model, training estimates) the caller did not supply."""
    if propensity is None:
        propensity, estimated = estimate_propensity(data, folds=folds, rng=rng)
        if pi_hat is None:
            pi_hat = estimated
    elif pi_hat is None:
        pi_hat = propensity.predict(data.covariates)
    pi_hat = np.asarray(pi_hat, dtype=float).ravel()
    if len(pi_hat) != data.n:
        raise ValueError(f"pi_hat has length {len(pi_hat)}, expected {data.n}")
    return propensity, pi_hat


def check_arms(data: CausalDataset, minimum: int = 2):
    n1 = int(data.treatment.sum())
    n0 = data.n - n1
    if min(n0, n1) < minimum:
        raise ArmTooSmallError(f"each arm needs >= {minimum} units (treated {n1}, control {n0})")


class CateModel:
    """A fitted CATE estimator.

    ``predict_cate`` takes the original ``d`` covariate columns; models fitted
    with ``use_ps`` append the stored propensity model's estimate internally.
    """

    family: str = ""

    def __init__(self, n_features: int, propensity: PropensityModel | None, use_ps: bool):
        self.n_features = n_features
        self.propensity = propensity
        self.use_ps = use_ps

    def features(self, X) -> np.ndarray:
        X = check_matrix(X, self.n_features)
        if self.use_ps:
            return np.column_stack([X, self.propensity.predict(X)])
        return X

    def predict_cate(self, X) -> np.ndarray:
        tau = np.asarray(self._cate(check_matrix(X, self.n_features)), dtype=float)
        if not np.all(np.isfinite(tau)):
            raise DivergenceError(f"{self.family} model produced non-finite CATE estimates")
        return tau

    def predict_outcomes(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Estimated conditional means ``(mu0(x), mu1(x))``."""
        raise NotImplementedError(f"{self.family} model has no outcome surfaces")

    def _cate(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


def predict_cate(model: CateModel, X_new) -> np.ndarray:
    return model.predict_cate(X_new)


__all__ = [
    "PS_COLUMN", "FAMILIES", "CateModel", "ArmTooSmallError", "DivergenceError", "DimensionError",
    "augment_with_propensity", "resolve_propensity", "check_arms", "predict_cate", "as_generator",
]
