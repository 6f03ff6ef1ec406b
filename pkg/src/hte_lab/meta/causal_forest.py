from __future__ import annotations

import numpy as np

from ..data import CausalDataset, as_generator
from ..learners.trees import grow_forest
from .base import ArmTooSmallError, CateModel, resolve_propensity


def _node_effects(tree, F_leaf, z, y, counts, fallback):
    """Per-node (tau, mu0, mu1) from in-bag arm means; arm-less nodes inherit from the parent."""
    n_nodes = tree.n_nodes
    stats = np.zeros((n_nodes, 4))  # n0, s0, n1, s1
    leaf = tree.apply(F_leaf)
    for col, arm in ((0, 0.0), (2, 1.0)):
        m = z == arm
        np.add.at(stats[:, col], leaf[m], counts[m])
        np.add.at(stats[:, col + 1], leaf[m], counts[m] * y[m])
    for node in range(n_nodes - 1, 0, -1):
        stats[tree.parent[node]] += stats[node]
    mu0 = np.empty(n_nodes)
    mu1 = np.empty(n_nodes)
    for node in range(n_nodes):
        n0, s0, n1, s1 = stats[node]
        parent = tree.parent[node]
        if node == 0:
            mu0[0] = s0 / n0 if n0 > 0 else fallback[0]
            mu1[0] = s1 / n1 if n1 > 0 else fallback[1]
        elif n0 > 0 and n1 > 0:
            mu0[node], mu1[node] = s0 / n0, s1 / n1
        else:
            mu0[node], mu1[node] = mu0[parent], mu1[parent]
    return mu0, mu1


class CausalForest(CateModel):
    family = "CF"

    def __init__(self, trees, node_mu0, node_mu1, n_features, propensity, use_ps):
        super().__init__(n_features, propensity, use_ps)
        self.trees = trees
        self.node_mu0 = node_mu0
        self.node_mu1 = node_mu1

    def predict_outcomes(self, X):
        F = self.features(X)
        leaves = [t.apply(F) for t in self.trees]
        mu0 = np.mean([m[l] for m, l in zip(self.node_mu0, leaves)], axis=0)
        mu1 = np.mean([m[l] for m, l in zip(self.node_mu1, leaves)], axis=0)
        return mu0, mu1

    def _cate(self, X):
        F = self.features(X)
        return np.mean([m1[t.apply(F)] - m0[t.apply(F)]
                        for t, m0, m1 in zip(self.trees, self.node_mu0, self.node_mu1)], axis=0)


def fit_causal_forest(data: CausalDataset, trees: int = 200, max_depth: int = 8, min_leaf: int = 5,
                      mtry: int | None = None, bootstrap: bool = True, rng=None, use_ps: bool = True,
                      propensity=None, pi_hat=None) -> CausalForest:
    """Bagged trees partitioning the covariates, then a final split on treatment.

    Each tree is grown like a regression forest on the outcome centred within
    its arm; every leaf then reports the treated-minus-control difference of
    in-bag means.  Centring stops the splits from grouping treated units by
    their level shift, which otherwise pulls control means up in treated-heavy
    leaves and biases the contrast toward zero.
    """
    z = data.treatment
    n1 = int(z.sum())
    if min(n1, data.n - n1) < min_leaf:
        raise ArmTooSmallError(f"each arm needs >= min_leaf={min_leaf} units")
    rng = as_generator(rng)
    if use_ps:
        propensity, pi_hat = resolve_propensity(data, propensity, pi_hat, rng)
        F = np.column_stack([data.covariates, pi_hat])
    else:
        F = data.covariates
    y = data.outcome
    fallback = (y[z == 0].mean(), y[z == 1].mean())
    target = y - np.where(z == 1, fallback[1], fallback[0])
    grown, mu0s, mu1s = [], [], []
    for tree, counts in grow_forest(F, target, np.ones(data.n), trees, max_depth, min_leaf, mtry, bootstrap, rng):
        mu0, mu1 = _node_effects(tree, F, z, y, counts.astype(float), fallback)
        grown.append(tree)
        mu0s.append(mu0)
        mu1s.append(mu1)
    return CausalForest(grown, mu0s, mu1s, data.d, propensity, use_ps)
