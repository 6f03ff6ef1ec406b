"""Meta-learners returning :class:`CateModel` objects with a shared ``predict_cate`` contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..learners import LearnerSpec
from .base import (
    FAMILIES, PS_COLUMN, ArmTooSmallError, CateModel, DivergenceError, augment_with_propensity, check_arms,
    predict_cate, resolve_propensity,
)
from .causal_forest import CausalForest, fit_causal_forest
from .multitask import MultitaskGP, fit_multitask_gp
from .rlearner import RLearner, RLearnerLossParts, fit_r_learner
from .tau import TauLearner, fit_tau_learner
from .two_model import SLearner, TLearner, XLearner, fit_s_learner, fit_t_learner, fit_x_learner

# options each family accepts beyond its learner specs
FAMILY_OPTIONS = {
    "S": {"use_ps"},
    "T": {"use_ps"},
    "X": {"use_ps", "weight_mode"},
    "R": {"folds"},
    "MT": {"use_ps", "lengthscale", "restarts", "optimize"},
    "TAU": {"sweeps", "tol"},
    "CF": {"use_ps", "trees", "max_depth", "min_leaf", "mtry", "bootstrap"},
}


@dataclass(frozen=True)
class ModelConfig:
    """A named meta-learner recipe.

    ``base`` is the main learner spec (tau learner for R, mu learner for TAU);
    ``tau_base`` / ``m_base`` are the optional secondary specs.
    """

    name: str
    family: str
    base: LearnerSpec | None = None
    tau_base: LearnerSpec | None = None
    m_base: LearnerSpec | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown meta-learner family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.options) - FAMILY_OPTIONS[self.family]
        if unknown:
            raise ValueError(f"{self.family} does not accept option(s) {sorted(unknown)}")
        if self.family in ("S", "T", "X", "R") and self.base is None:
            raise ValueError(f"{self.family} model {self.name!r} needs a base learner")
        if self.family == "R" and self.m_base is None:
            raise ValueError(f"R model {self.name!r} needs m_base")

    def fit(self, data, rng=None, propensity=None, pi_hat=None) -> CateModel:
        o = self.options
        f = self.family
        if f == "S":
            return fit_s_learner(data, self.base, rng=rng, propensity=propensity, pi_hat=pi_hat, **o)
        if f == "T":
            return fit_t_learner(data, self.base, rng=rng, propensity=propensity, pi_hat=pi_hat, **o)
        if f == "X":
            return fit_x_learner(data, self.base, pi_hat=pi_hat, rng=rng, propensity=propensity,
                                 tau_base=self.tau_base, **o)
        if f == "R":
            return fit_r_learner(data, self.base, self.m_base, rng=rng, propensity=propensity, pi_hat=pi_hat, **o)
        if f == "MT":
            return fit_multitask_gp(data, rng=rng, propensity=propensity, pi_hat=pi_hat, **o)
        if f == "TAU":
            kw = {"base_mu": self.base} if self.base is not None else {}
            return fit_tau_learner(data, base_tau=self.tau_base, pi_hat=pi_hat, rng=rng, propensity=propensity,
                                   **kw, **o)
        return fit_causal_forest(data, rng=rng, propensity=propensity, pi_hat=pi_hat, **o)


__all__ = [
    "FAMILIES", "PS_COLUMN", "CateModel", "ArmTooSmallError", "DivergenceError", "ModelConfig",
    "augment_with_propensity", "check_arms", "predict_cate", "resolve_propensity",
    "SLearner", "TLearner", "XLearner", "RLearner", "RLearnerLossParts", "MultitaskGP", "TauLearner",
    "CausalForest",
    "fit_s_learner", "fit_t_learner", "fit_x_learner", "fit_r_learner", "fit_multitask_gp",
    "fit_tau_learner", "fit_causal_forest",
]
