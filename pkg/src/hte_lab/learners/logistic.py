from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import check_matrix

PROB_EPS = 1e-12


class ConvergenceError(RuntimeError):
    pass


class ClassifierModel:
    """L2-penalised logistic regression (intercept unpenalised)."""

    def __init__(self, intercept: float, coef: np.ndarray, iterations: int):
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=float)
        self.n_features = len(self.coef)
        self.iterations = iterations

    def decision_function(self, X) -> np.ndarray:
        X = check_matrix(X, self.n_features)
        return self.intercept + X @ self.coef

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), PROB_EPS, 1 - PROB_EPS)


def penalized_loglik(theta, X, z, l2) -> float:
    eta = theta[0] + X @ theta[1:]
    # log p = -log(1 + e^{-eta}); log(1-p) = -log(1 + e^{eta})
    ll = -(z * np.logaddexp(0, -eta) + (1 - z) * np.logaddexp(0, eta)).sum()
    return float(ll - 0.5 * l2 * theta[1:] @ theta[1:])


def fit_classifier(X, z, l2: float = 1.0, tol: float = 1e-8, max_iter: int = 200) -> ClassifierModel:
    """Damped Newton ascent on the penalised log-likelihood."""
    X = check_matrix(X)
    z = np.asarray(z, dtype=float).ravel()
    if len(z) != len(X):
        raise ValueError("X and z lengths differ")
    if not (np.any(z == 1) and np.any(z == 0)):
        raise ValueError("both classes must be present")
    if l2 < 1e-6:
        raise ValueError("l2 must be >= 1e-6")
    n, d = X.shape
    A = np.column_stack([np.ones(n), X])
    pen = np.full(d + 1, l2)
    pen[0] = 0.0
    theta = np.zeros(d + 1)
    zbar = z.mean()
    theta[0] = np.log(zbar / (1 - zbar))
    obj = penalized_loglik(theta, X, z, l2)
    for it in range(1, max_iter + 1):
        p = expit(A @ theta)
        grad = A.T @ (z - p) - pen * theta
        if np.linalg.norm(grad) <= tol:
            return ClassifierModel(theta[0], theta[1:], it - 1)
        H = (A * (p * (1 - p))[:, None]).T @ A + np.diag(pen)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = theta + t * step
            cand_obj = penalized_loglik(cand, X, z, l2)
            if cand_obj >= obj - 1e-12 * abs(obj) or t < 1e-10:
                break
            t *= 0.5
        theta, obj = cand, cand_obj
    p = expit(A @ theta)
    if np.linalg.norm(A.T @ (z - p) - pen * theta) <= tol:
        return ClassifierModel(theta[0], theta[1:], max_iter)
    raise ConvergenceError(f"logistic regression did not converge in {max_iter} Newton iterations")
