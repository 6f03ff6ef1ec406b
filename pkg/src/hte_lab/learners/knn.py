from __future__ import annotations

import numpy as np

from .base import LearnerSpec, RegressionModel, check_matrix, check_weights


class KNNModel(RegressionModel):
    """Average of the ``k`` nearest training outcomes (Euclidean distance).

    Ties in distance go to the lower training row index.
    """

    def __init__(self, X, y, k: int, weights=None):
        self.spec = LearnerSpec("knn", {"k": k})
        self.X = X
        self.y = y
        self.w = weights
        self.k = k
        self.n_features = X.shape[1]

    def neighbors(self, Xq, chunk: int = 256) -> np.ndarray:
        idx = np.empty((len(Xq), self.k), dtype=np.intp)
        for s in range(0, len(Xq), chunk):
            diff = Xq[s:s + chunk, None, :] - self.X[None, :, :]
            dist = np.einsum("qnd,qnd->qn", diff, diff)
            idx[s:s + chunk] = np.argsort(dist, axis=1, kind="stable")[:, :self.k]
        return idx

    def _predict(self, X):
        nb = self.neighbors(X)
        if self.w is None:
            return self.y[nb].mean(axis=1)
        w = self.w[nb]
        return (w * self.y[nb]).sum(axis=1) / np.maximum(w.sum(axis=1), 1e-300)


def fit_knn(X, y, k: int, weights=None) -> KNNModel:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = None if weights is None else check_weights(weights, len(y))
    if w is not None:
        keep = w > 0
        X, y, w = X[keep], y[keep], w[keep]
    if not 1 <= k <= len(y):
        raise ValueError(f"k must lie in [1, {len(y)}], got {k}")
    return KNNModel(X.copy(), y.copy(), int(k), w)
