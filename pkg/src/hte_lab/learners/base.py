"""Learner specifications and the common fitted-model contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

FAMILIES = ("linear", "knn", "tree", "forest", "boosting", "gp")

# Allowed hyperparameters per family, with defaults.  ``None`` for a tunable
# parameter (lam, k) means "choose by 5-fold cross-validation".
DEFAULTS: dict[str, dict[str, Any]] = {
    "linear": {"penalty": "none", "lam": None},
    "knn": {"k": None},
    "tree": {"max_depth": 4, "min_leaf": 5},
    "forest": {"trees": 200, "max_depth": 8, "min_leaf": 5, "mtry": None, "bootstrap": True},
    "boosting": {"rounds": 200, "rate": 0.1, "max_depth": 3, "min_leaf": 5},
    "gp": {"lengthscale": 1.0, "variance": 1.0, "noise": 0.1, "optimize": True,
           "restarts": 2, "center": True},
}


class SpecError(ValueError):
    """Invalid learner family or hyperparameter."""


def _check(cond: bool, msg: str):
    if not cond:
        raise SpecError(msg)


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown learner family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise SpecError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")
        merged = {**DEFAULTS[self.family], **self.params}
        _validate(self.family, merged)
        object.__setattr__(self, "params", MappingProxyType(merged))

    def __getitem__(self, key: str):
        return self.params[key]

    def replace(self, **params) -> "LearnerSpec":
        return LearnerSpec(self.family, {**self.params, **params})

    def __reduce__(self):
        return (LearnerSpec, (self.family, dict(self.params)))

    def __repr__(self):
        return f"LearnerSpec({self.family!r}, {dict(self.params)!r})"


def _validate(family: str, p: dict):
    if family == "linear":
        _check(p["penalty"] in ("none", "ridge", "lasso"), f"penalty must be none/ridge/lasso, got {p['penalty']!r}")
        _check(p["lam"] is None or p["lam"] >= 0, "penalty strength must be >= 0")
    elif family == "knn":
        _check(p["k"] is None or (int(p["k"]) == p["k"] and p["k"] >= 1), "k must be an integer >= 1")
    elif family in ("tree", "forest", "boosting"):
        _check(int(p["max_depth"]) == p["max_depth"] and p["max_depth"] >= 0, "max_depth must be >= 0")
        _check(p["min_leaf"] >= 1, "min_leaf must be >= 1")
        if family == "forest":
            _check(p["trees"] >= 1, "trees must be >= 1")
            _check(p["mtry"] is None or p["mtry"] >= 1, "mtry must be >= 1")
        if family == "boosting":
            _check(p["rounds"] >= 1, "rounds must be >= 1")
            _check(0 < p["rate"] <= 1, "learning rate must lie in (0, 1]")
    elif family == "gp":
        for key in ("lengthscale", "variance", "noise"):
            _check(p[key] > 0, f"{key} must be > 0")
        _check(p["restarts"] >= 0, "restarts must be >= 0")


class DimensionError(ValueError):
    pass


def check_matrix(X, d: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError("expected a 2-d matrix")
    if d is not None and X.shape[1] != d:
        raise DimensionError(f"expected {d} columns, got {X.shape[1]}")
    return X


def check_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).ravel()
    if len(w) != n:
        raise ValueError(f"weights have length {len(w)}, expected {n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ValueError("weights must be finite, non-negative and not all zero")
    return w


class RegressionModel:
    """Fitted conditional-mean estimator.

    Subclasses implement ``_predict``; ``predict`` enforces the column count
    seen at fit time and finiteness of the output.
    """

    spec: LearnerSpec
    n_features: int

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, self.n_features)
        out = np.asarray(self._predict(X), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"{self.spec.family} model produced non-finite predictions")
        return out

    def _predict(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError
