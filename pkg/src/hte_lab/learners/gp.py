"""Exact Gaussian-process regression with an isotropic RBF kernel."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .base import LearnerSpec, RegressionModel, check_matrix, check_weights

MAX_POINTS = 5000
JITTER = 1e-6
MAX_JITTER = 1e-2

# log-space box for (lengthscale, variance, noise) during optimisation
LOG_BOUNDS = [(np.log(1e-3), np.log(1e3)), (np.log(1e-6), np.log(1e6)), (np.log(1e-8), np.log(1e4))]


class IllConditionedKernelError(np.linalg.LinAlgError):
    pass


def sq_dist(A, B) -> np.ndarray:
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def rbf(A, B, lengthscale: float, variance: float) -> np.ndarray:
    return variance * np.exp(-0.5 * sq_dist(A, B) / lengthscale**2)


def robust_cholesky(K: np.ndarray, jitter: float = JITTER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*I``, escalating jitter up to 1e-2."""
    eye = np.eye(len(K))
    while jitter <= MAX_JITTER * (1 + 1e-9):
        try:
            return cholesky(K + jitter * eye, lower=True, check_finite=True), jitter
        except (np.linalg.LinAlgError, ValueError):
            jitter *= 10.0
    raise IllConditionedKernelError("kernel matrix not positive definite even with jitter 1e-2")


def lml_and_grad(K: np.ndarray, y: np.ndarray, dKs: list[np.ndarray]) -> tuple[float, np.ndarray]:
    """Log marginal likelihood of ``y ~ N(0, K)`` and its gradient.

    ``dKs`` are the derivatives of ``K`` with respect to each parameter.
    """
    L, _ = robust_cholesky(K)
    alpha = cho_solve((L, True), y)
    n = len(y)
    lml = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2 * np.pi)
    if not dKs:
        return float(lml), np.zeros(0)
    Kinv = cho_solve((L, True), np.eye(n))
    inner = np.outer(alpha, alpha) - Kinv
    grad = np.array([0.5 * np.sum(inner * dK) for dK in dKs])
    return float(lml), grad


def rbf_lml(log_params, X, y, noise_scale=None):
    """LML and gradient in log (lengthscale, variance, noise) for an RBF kernel.

    ``noise_scale`` multiplies the noise per point (heteroscedastic weights).
    """
    ls, var, noise = np.exp(log_params)
    D = sq_dist(X, X)
    E = np.exp(-0.5 * D / ls**2)
    ns = np.ones(len(y)) if noise_scale is None else noise_scale
    K = var * E + np.diag(noise * ns)
    dKs = [var * E * D / ls**2, var * E, np.diag(noise * ns)]
    return lml_and_grad(K, y, dKs)


def maximize_lml(objective, x0, bounds, restarts: int, sampler, rng):
    """Gradient-based ascent from ``x0`` plus ``restarts`` random starts."""
    best_x, best_f = None, -np.inf

    def neg(x):
        try:
            f, g = objective(x)
        except IllConditionedKernelError:
            return 1e25, np.zeros_like(x)
        return -f, -g

    starts = [np.asarray(x0, dtype=float)] + [sampler(rng) for _ in range(restarts)]
    for start in starts:
        start = np.clip(start, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(neg, start, jac=True, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and -res.fun > best_f:
            best_x, best_f = res.x, -res.fun
    if best_x is None:
        raise IllConditionedKernelError("marginal likelihood could not be evaluated at any start")
    return best_x, best_f


class GPModel(RegressionModel):
    def __init__(self, spec, X, y, mean, lengthscale, variance, noise, noise_scale):
        self.spec = spec
        self.X = X
        self.mean = mean
        self.lengthscale = lengthscale
        self.variance = variance
        self.noise = noise
        self.n_features = X.shape[1]
        K = rbf(X, X, lengthscale, variance) + np.diag(noise * noise_scale)
        self.L, self.jitter = robust_cholesky(K)
        self.alpha = cho_solve((self.L, True), y - mean)
        self.log_marginal_likelihood = float(
            -0.5 * (y - mean) @ self.alpha - np.log(np.diag(self.L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
        )

    def _predict(self, X):
        return self.mean + rbf(X, self.X, self.lengthscale, self.variance) @ self.alpha

    def predict_var(self, X) -> np.ndarray:
        """Posterior variance of the latent function (noise excluded)."""
        X = check_matrix(X, self.n_features)
        Ks = rbf(self.X, X, self.lengthscale, self.variance)
        v = solve_triangular(self.L, Ks, lower=True)
        return np.maximum(self.variance - (v * v).sum(0), 0.0)


def fit_gp(X, y, lengthscale: float = 1.0, variance: float = 1.0, noise: float = 0.1,
           optimize: bool = False, restarts: int = 0, rng=None, center: bool = False,
           weights=None) -> GPModel:
    """Fit a zero-mean (or empirically centred) GP.

    Per-point weights act as noise precisions: point i has noise ``noise / w_i``;
    zero-weight points are dropped.
    """
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) > MAX_POINTS:
        raise ValueError(f"dense GP limited to {MAX_POINTS} points, got {len(y)}")
    if noise <= 0:
        raise ValueError("noise must be > 0")
    w = check_weights(weights, len(y))
    keep = w > 0
    X, y, w = X[keep], y[keep], w[keep]
    noise_scale = w.mean() / w
    mean = float(y.mean()) if center else 0.0
    yc = y - mean
    params = np.log([lengthscale, variance, noise])
    if optimize:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        scale = max(float(np.var(yc)), 1e-6)

        def sampler(g):
            return np.log([np.exp(g.uniform(np.log(0.1), np.log(10.0))),
                           scale * np.exp(g.uniform(np.log(0.1), np.log(10.0))),
                           scale * np.exp(g.uniform(np.log(1e-3), np.log(1.0)))])

        params, _ = maximize_lml(lambda p: rbf_lml(p, X, yc, noise_scale), params, LOG_BOUNDS,
                                 restarts, sampler, rng)
    ls, var, nz = np.exp(params)
    spec = LearnerSpec("gp", {"lengthscale": float(ls), "variance": float(var), "noise": float(nz),
                              "optimize": optimize, "restarts": restarts, "center": center})
    return GPModel(spec, X, y, mean, float(ls), float(var), float(nz), noise_scale)
