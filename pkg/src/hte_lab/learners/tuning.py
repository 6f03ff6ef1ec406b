"""Fold assignment, grid-search cross-validation and LearnerSpec dispatch."""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .base import LearnerSpec, RegressionModel, check_matrix, check_weights
from .gp import fit_gp
from .knn import fit_knn
from .linear import fit_linear, lasso_grid, lasso_path
from .trees import fit_boosting, fit_forest, fit_tree

KNN_GRID = (1, 3, 5, 10, 20)
RIDGE_GRID = tuple(10.0 ** np.arange(-4, 3))
DEFAULT_FOLDS = 5


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def fold_ids(n: int, folds: int, rng) -> np.ndarray:
    """Balanced random fold labels 0..folds-1."""
    ids = np.empty(n, dtype=int)
    ids[_rng(rng).permutation(n)] = np.arange(n) % folds
    return ids


def tuning_grid(spec: LearnerSpec, X, y, weights=None) -> list[dict[str, Any]]:
    """Grid for hyperparameters left unspecified (``None``) in ``spec``; may be empty."""
    if spec.family == "linear" and spec["penalty"] != "none" and spec["lam"] is None:
        lams = lasso_grid(X, y, weights) if spec["penalty"] == "lasso" else RIDGE_GRID
        return [{"lam": float(v)} for v in lams]
    if spec.family == "knn" and spec["k"] is None:
        return [{"k": k} for k in KNN_GRID]
    return []


def fit(spec: LearnerSpec, X, y, weights=None, rng=None, folds: int = DEFAULT_FOLDS) -> RegressionModel:
    """Fit ``spec``; unspecified tunable hyperparameters are chosen by CV first."""
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    rng = _rng(rng)
    grid = tuning_grid(spec, X, y, weights)
    if grid:
        if spec.family == "knn":
            n_pos = len(y) if weights is None else int((np.asarray(weights) > 0).sum())
            grid = [g for g in grid if g["k"] <= n_pos * (folds - 1) // folds] or [{"k": 1}]
        spec = spec.replace(**cross_validate(spec, X, y, folds, grid, rng, weights))
    return _fit_fixed(spec, X, y, weights, rng)


def _fit_fixed(spec, X, y, weights, rng) -> RegressionModel:
    p = spec.params
    if spec.family == "linear":
        return fit_linear(X, y, p["penalty"], 0.0 if p["lam"] is None else p["lam"], weights=weights)
    if spec.family == "knn":
        return fit_knn(X, y, int(p["k"]), weights=weights)
    if spec.family == "tree":
        return fit_tree(X, y, int(p["max_depth"]), int(p["min_leaf"]), weights=weights)
    if spec.family == "forest":
        return fit_forest(X, y, int(p["trees"]), int(p["max_depth"]), int(p["min_leaf"]), p["mtry"],
                          bool(p["bootstrap"]), rng=rng, weights=weights)
    if spec.family == "boosting":
        return fit_boosting(X, y, int(p["rounds"]), p["rate"], int(p["max_depth"]), int(p["min_leaf"]),
                            weights=weights)
    return fit_gp(X, y, p["lengthscale"], p["variance"], p["noise"], bool(p["optimize"]),
                  int(p["restarts"]), rng=rng, center=bool(p["center"]), weights=weights)


def cross_validate(spec: LearnerSpec, X, y, folds: int, grid: Sequence[dict[str, Any]], rng=None,
                   weights=None) -> dict[str, Any]:
    """Grid point with the smallest pooled out-of-fold (weighted) squared error.

    Ties resolve to the earliest grid point.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if not grid:
        raise ValueError("grid must be non-empty")
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = check_weights(weights, len(y))
    rng = _rng(rng)
    if len(grid) == 1:
        return dict(grid[0])
    errors = cv_errors(spec, X, y, w, fold_ids(len(y), folds, rng), grid, rng)
    best = 0
    for i, e in enumerate(errors):
        if e < errors[best]:
            best = i
    return dict(grid[best])


def cv_errors(spec, X, y, w, ids, grid, rng) -> np.ndarray:
    sse = np.zeros(len(grid))
    lasso_only = (spec.family == "linear" and spec["penalty"] == "lasso"
                  and all(set(g) == {"lam"} for g in grid))
    for f in np.unique(ids):
        tr, te = ids != f, ids == f
        if lasso_only:
            wt = w[tr]
            sw = wt / wt.sum()
            xbar, ybar = sw @ X[tr], sw @ y[tr]
            betas = lasso_path(X[tr], y[tr], [g["lam"] for g in grid], weights=wt)
            preds = (ybar - betas @ xbar)[:, None] + betas @ X[te].T
        else:
            preds = [_fit_fixed(spec.replace(**g), X[tr], y[tr], w[tr], rng).predict(X[te]) for g in grid]
        for i, pred in enumerate(preds):
            sse[i] += w[te] @ (y[te] - pred) ** 2
    return sse / w.sum()
