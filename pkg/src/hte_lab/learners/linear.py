"""Least squares, ridge and lasso with an unpenalized intercept.

Penalized fits minimise

    (1 / (2 sum(w))) * sum_i w_i (y_i - b0 - x_i . beta)^2 + P(beta)

with ``P = lam/2 * ||beta||^2`` (ridge) or ``P = lam * ||beta||_1`` (lasso).
"""

from __future__ import annotations

import numpy as np

from .base import LearnerSpec, RegressionModel, check_matrix, check_weights


class SingularDesignError(np.linalg.LinAlgError):
    pass


class LinearModel(RegressionModel):
    def __init__(self, spec: LearnerSpec, intercept: float, coef: np.ndarray):
        self.spec = spec
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=float)
        self.n_features = len(self.coef)

    def _predict(self, X):
        return self.intercept + X @ self.coef


def _centered(X, y, w):
    sw = w / w.sum()
    xbar = sw @ X
    ybar = sw @ y
    return X - xbar, y - ybar, xbar, ybar, sw


def fit_linear(X, y, penalty: str = "none", lam: float = 0.0, weights=None, tol: float = 1e-8,
               max_sweeps: int = 100_000) -> LinearModel:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n != len(y) or n < 2:
        raise ValueError("need len(y) == rows(X) >= 2")
    w = check_weights(weights, n)
    spec = LearnerSpec("linear", {"penalty": penalty, "lam": None if penalty == "none" else lam})
    if penalty == "none":
        keep = w > 0
        A = np.column_stack([np.ones(keep.sum()), X[keep]])
        sq = np.sqrt(w[keep])
        Aw = A * sq[:, None]
        if np.linalg.matrix_rank(Aw) < d + 1:
            raise SingularDesignError("design matrix (with intercept) is rank deficient")
        theta, *_ = np.linalg.lstsq(Aw, y[keep] * sq, rcond=None)
        return LinearModel(spec, theta[0], theta[1:])
    Xc, yc, xbar, ybar, sw = _centered(X, y, w)
    if penalty == "ridge":
        G = Xc.T @ (sw[:, None] * Xc)
        beta = np.linalg.solve(G + lam * np.eye(d), Xc.T @ (sw * yc)) if d else np.zeros(0)
    elif penalty == "lasso":
        beta = lasso_path(X, y, [lam], weights=w, tol=tol, max_sweeps=max_sweeps)[0]
    else:
        raise ValueError(f"unknown penalty {penalty!r}")
    return LinearModel(spec, ybar - xbar @ beta, beta)


def soft_threshold(v, lam):
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def lasso_lambda_max(X, y, weights=None) -> float:
    X = check_matrix(X)
    w = check_weights(weights, len(y))
    Xc, yc, _, _, sw = _centered(X, np.asarray(y, dtype=float), w)
    return float(np.max(np.abs(Xc.T @ (sw * yc)))) if X.shape[1] else 0.0


def lasso_grid(X, y, weights=None, n: int = 50, ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced penalties from the smallest all-zero penalty down by ``ratio``."""
    lmax = lasso_lambda_max(X, y, weights)
    if lmax <= 0:
        return np.zeros(1)
    return np.geomspace(lmax, lmax * ratio, n)


def lasso_path(X, y, lams, weights=None, tol: float = 1e-8, max_sweeps: int = 100_000) -> np.ndarray:
    """Slopes for each penalty in ``lams`` (warm-started in the given order).

    Cyclic coordinate descent on the Gram form; stops when the largest
    coefficient change in a sweep falls below ``tol``.
    """
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = check_weights(weights, len(y))
    Xc, yc, _, _, sw = _centered(X, y, w)
    G = Xc.T @ (sw[:, None] * Xc)
    c = Xc.T @ (sw * yc)
    d = X.shape[1]
    diag = np.diag(G).copy()
    active = diag > 1e-14
    beta = np.zeros(d)
    grad = c.copy()  # c - G beta
    out = np.empty((len(lams), d))
    for li, lam in enumerate(lams):
        for _ in range(max_sweeps):
            delta_max = 0.0
            for j in range(d):
                if not active[j]:
                    continue
                old = beta[j]
                new = soft_threshold(grad[j] + diag[j] * old, lam) / diag[j]
                if new != old:
                    grad -= G[:, j] * (new - old)
                    beta[j] = new
                    delta_max = max(delta_max, abs(new - old))
            if delta_max <= tol:
                break
        out[li] = beta
    return out
