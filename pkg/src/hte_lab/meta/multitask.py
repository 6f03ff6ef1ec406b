"""Multitask GP over (x, z) with an intrinsic-coregionalization kernel.

    K((x, s), (x', t)) = B[s, t] * exp(-|x - x'|^2 / (2 l^2))

``B = L L^T`` with ``L`` lower triangular (log-parameterised diagonal).  The
treatment indicator selects the task; tau(x) = f(x, 1) - f(x, 0).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ..data import CausalDataset, as_generator
from ..learners.gp import MAX_POINTS, lml_and_grad, maximize_lml, robust_cholesky, sq_dist
from .base import CateModel, check_arms, resolve_propensity

# (log L00, L10, log L11, log lengthscale, log noise)
BOUNDS = [(-10.0, 8.0), (-1e3, 1e3), (-10.0, 8.0), (np.log(1e-3), np.log(1e3)), (np.log(1e-8), np.log(1e4))]


def coregion_matrix(a: float, b: float, c: float) -> np.ndarray:
    l00, l11 = np.exp(a), np.exp(c)
    return np.array([[l00 * l00, l00 * b], [l00 * b, b * b + l11 * l11]])


def _coregion_grads(a, b, c):
    l00, l11 = np.exp(a), np.exp(c)
    return [
        np.array([[2 * l00 * l00, l00 * b], [l00 * b, 0.0]]),
        np.array([[0.0, l00], [l00, 2 * b]]),
        np.array([[0.0, 0.0], [0.0, 2 * l11 * l11]]),
    ]


def icm_lml(params, F, task, y, fixed_B=None):
    """LML and gradient; with ``fixed_B`` only (lengthscale, noise) are free."""
    if fixed_B is None:
        a, b, c, log_ls, log_noise = params
        B = coregion_matrix(a, b, c)
    else:
        log_ls, log_noise = params
        B = fixed_B
    ls, noise = np.exp(log_ls), np.exp(log_noise)
    D = sq_dist(F, F)
    E = np.exp(-0.5 * D / ls**2)
    Bzz = B[np.ix_(task, task)]
    K = Bzz * E + noise * np.eye(len(y))
    dKs = [] if fixed_B is not None else [dB[np.ix_(task, task)] * E for dB in _coregion_grads(a, b, c)]
    dKs += [Bzz * E * D / ls**2, noise * np.eye(len(y))]
    return lml_and_grad(K, y, dKs)


class MultitaskGP(CateModel):
    family = "MT"

    def __init__(self, F, task, y, mean, B, lengthscale, noise, n_features, propensity, use_ps):
        super().__init__(n_features, propensity, use_ps)
        self.F, self.task, self.mean = F, task, mean
        self.B = B
        self.lengthscale = lengthscale
        self.noise = noise
        K = B[np.ix_(task, task)] * np.exp(-0.5 * sq_dist(F, F) / lengthscale**2) + noise * np.eye(len(y))
        self.L, self.jitter = robust_cholesky(K)
        self.alpha = cho_solve((self.L, True), y - mean)

    def _cross(self, Fq, t: int) -> np.ndarray:
        return self.B[t, self.task][None, :] * np.exp(-0.5 * sq_dist(Fq, self.F) / self.lengthscale**2)

    def predict_outcomes(self, X):
        Fq = self.features(X)
        return self.mean + self._cross(Fq, 0) @ self.alpha, self.mean + self._cross(Fq, 1) @ self.alpha

    def _cate(self, X):
        Fq = self.features(X)
        return (self._cross(Fq, 1) - self._cross(Fq, 0)) @ self.alpha

    def predict_cate_var(self, X) -> np.ndarray:
        """Posterior variance of f(x, 1) - f(x, 0)."""
        Fq = self.features(X)
        diff = (self._cross(Fq, 1) - self._cross(Fq, 0)).T
        v = solve_triangular(self.L, diff, lower=True)
        prior = self.B[1, 1] + self.B[0, 0] - 2 * self.B[0, 1]
        return np.maximum(prior - (v * v).sum(0), 0.0)


def fit_multitask_gp(data: CausalDataset, lengthscale: float = 1.0, noise: float | None = None,
                     coregion=None, optimize: bool = True, restarts: int = 3, rng=None,
                     use_ps: bool = True, propensity=None, pi_hat=None) -> MultitaskGP:
    """Joint GP for both arms.

    ``coregion`` fixes ``B`` (2x2 PSD); otherwise ``B``, the lengthscale and
    the noise are set by marginal-likelihood ascent with ``restarts`` extra
    random starts.  Outcomes are centred by their overall mean.
    """
    if data.n > MAX_POINTS:
        raise ValueError(f"dense GP limited to {MAX_POINTS} points, got {data.n}")
    check_arms(data, 1)
    rng = as_generator(rng)
    if use_ps:
        propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
        F = np.column_stack([data.covariates, pi_hat])
    else:
        F = data.covariates
    task = data.treatment.astype(int)
    y = data.outcome
    mean = float(y.mean())
    yc = y - mean
    scale = max(float(np.var(yc)), 1e-8)
    noise = 0.1 * scale if noise is None else noise
    fixed_B = None if coregion is None else np.asarray(coregion, dtype=float)
    if fixed_B is None:
        sd = np.sqrt(scale)
        params = np.array([np.log(sd), 0.9 * sd, np.log(0.45 * sd), np.log(lengthscale), np.log(noise)])
        bounds = BOUNDS
    else:
        params = np.log([lengthscale, noise])
        bounds = BOUNDS[3:]
    if optimize:
        def sampler(g):
            ls0 = g.uniform(np.log(0.2), np.log(5.0))
            nz0 = np.log(scale) + g.uniform(np.log(1e-3), np.log(0.5))
            if fixed_B is not None:
                return np.array([ls0, nz0])
            sd0 = np.sqrt(scale) * np.exp(g.uniform(-1, 1))
            rho = g.uniform(-0.2, 1.0)
            return np.array([np.log(sd0), rho * sd0, np.log(sd0 * max(np.sqrt(1 - rho**2), 0.05)), ls0, nz0])

        params, _ = maximize_lml(lambda p: icm_lml(p, F, task, yc, fixed_B), params, bounds, restarts, sampler, rng)
    if fixed_B is None:
        B = coregion_matrix(*params[:3])
        ls, nz = np.exp(params[3:])
    else:
        B = fixed_B
        ls, nz = np.exp(params)
    return MultitaskGP(F, task, y, mean, B, float(ls), float(nz), data.d, propensity, use_ps)
