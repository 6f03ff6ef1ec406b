"""CART regression trees, bagged forests and least-squares boosting."""

from __future__ import annotations

import math

import numpy as np

from .base import LearnerSpec, RegressionModel, check_matrix, check_weights

LEAF = -1


class Tree:
    """Array-backed binary tree.  Node 0 is the root; children follow parents."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.parent: list[int] = []
        self.value: list[float] = []

    def _add(self, parent: int, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(math.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.parent.append(parent)
        self.value.append(value)
        return len(self.value) - 1

    def freeze(self) -> "Tree":
        for name in ("feature", "left", "right", "parent"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.intp))
        for name in ("threshold", "value"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.depth = self._depth()
        return self

    def _depth(self) -> int:
        depth = np.zeros(len(self.value), dtype=int)
        for node in range(1, len(self.value)):
            depth[node] = depth[self.parent[node]] + 1
        return int(depth.max())

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            feat = self.feature[node]
            internal = feat != LEAF
            if not internal.any():
                break
            r = rows[internal]
            n = node[internal]
            go_left = X[r, feat[internal]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


def best_split(X, y, w, features, min_leaf):
    """Best (gain, feature, threshold) over ``features`` or None.

    Maximises the reduction in weighted within-child squared error.  Ties go to
    the earlier feature in ``features`` and then to the lower threshold.
    """
    m = len(y)
    if m < 2 * min_leaf:
        return None
    Xn = X[:, features]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ws = w[order]
    wys = (w * y)[order]
    cw = np.cumsum(ws, axis=0)[:-1]
    cwy = np.cumsum(wys, axis=0)[:-1]
    W = w.sum()
    S = (w * y).sum()
    rw = W - cw
    pos = np.arange(1, m)[:, None]
    valid = (xs[:-1] < xs[1:]) & (pos >= min_leaf) & (m - pos >= min_leaf) & (cw > 0) & (rw > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = cwy**2 / cw + (S - cwy) ** 2 / rw
    score = np.where(valid, score, -np.inf)
    flat = np.argmax(score.T)  # feature-major: first feature, then lowest threshold
    f, i = divmod(flat, m - 1)
    gain = score[i, f] - S * S / W
    return gain, features[f], 0.5 * (xs[i, f] + xs[i + 1, f])


def build_tree(X, y, w, max_depth: int, min_leaf: int, mtry: int | None = None, rng=None) -> Tree:
    """Greedy depth-first CART on rows with positive weight."""
    n, d = X.shape
    keep = w > 0
    if not keep.all():
        X, y, w = X[keep], y[keep], w[keep]
    tree = Tree()
    all_features = np.arange(d)
    stack = [(np.arange(len(y)), 0, tree._add(LEAF, float(w @ y / w.sum())))]
    while stack:
        idx, depth, node = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            continue
        yi, wi = y[idx], w[idx]
        mean = wi @ yi / wi.sum()
        sse = wi @ (yi - mean) ** 2
        if sse <= 1e-14 * max(1.0, wi @ yi**2):
            continue
        if mtry is not None and mtry < d:
            features = np.sort(rng.choice(d, size=mtry, replace=False))
        else:
            features = all_features
        found = best_split(X[idx], yi, wi, features, min_leaf)
        if found is None or found[0] <= 1e-12 * sse:
            continue
        _, f, thr = found
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = tree._add(node, float(w[li] @ y[li] / w[li].sum()))
        right = tree._add(node, float(w[ri] @ y[ri] / w[ri].sum()))
        tree.feature[node], tree.threshold[node] = int(f), float(thr)
        tree.left[node], tree.right[node] = left, right
        stack.append((ri, depth + 1, right))
        stack.append((li, depth + 1, left))
    return tree.freeze()


class TreeModel(RegressionModel):
    def __init__(self, spec, tree: Tree, d: int):
        self.spec = spec
        self.tree = tree
        self.n_features = d

    def _predict(self, X):
        return self.tree.predict(X)


def fit_tree(X, y, max_depth: int = 4, min_leaf: int = 5, weights=None) -> TreeModel:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = check_weights(weights, len(y))
    spec = LearnerSpec("tree", {"max_depth": max_depth, "min_leaf": min_leaf})
    return TreeModel(spec, build_tree(X, y, w, max_depth, min_leaf), X.shape[1])


def default_mtry(d: int) -> int:
    return max(1, math.ceil(d / 3))


def grow_forest(X, y, w, trees, max_depth, min_leaf, mtry, bootstrap, rng):
    """Yield ``(tree, in_bag_counts)`` per tree."""
    n, d = X.shape
    mtry = default_mtry(d) if mtry is None else min(int(mtry), d)
    seeds = rng.integers(0, 2**63, size=trees)
    for seed in seeds:
        tree_rng = np.random.default_rng(seed)
        counts = np.bincount(tree_rng.integers(0, n, n), minlength=n) if bootstrap else np.ones(n, dtype=int)
        tree = build_tree(X, y, w * counts, max_depth, min_leaf, mtry, tree_rng)
        yield tree, counts


class ForestModel(RegressionModel):
    def __init__(self, spec, trees: list[Tree], d: int):
        self.spec = spec
        self.trees = trees
        self.n_features = d

    def _predict(self, X):
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_forest(X, y, trees: int = 200, max_depth: int = 8, min_leaf: int = 5, mtry: int | None = None,
               bootstrap: bool = True, rng=None, weights=None) -> ForestModel:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = check_weights(weights, len(y))
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    spec = LearnerSpec("forest", {"trees": trees, "max_depth": max_depth, "min_leaf": min_leaf,
                                  "mtry": mtry, "bootstrap": bootstrap})
    grown = [t for t, _ in grow_forest(X, y, w, trees, max_depth, min_leaf, mtry, bootstrap, rng)]
    return ForestModel(spec, grown, X.shape[1])


class BoostingModel(RegressionModel):
    def __init__(self, spec, init: float, rate: float, trees: list[Tree], d: int):
        self.spec = spec
        self.init = init
        self.rate = rate
        self.trees = trees
        self.n_features = d

    def _predict(self, X):
        out = np.full(len(X), self.init)
        for t in self.trees:
            out += self.rate * t.predict(X)
        return out

    def staged_predict(self, X):
        """Predictions after each boosting round."""
        X = check_matrix(X, self.n_features)
        out = np.full(len(X), self.init)
        for t in self.trees:
            out = out + self.rate * t.predict(X)
            yield out


def fit_boosting(X, y, rounds: int = 200, rate: float = 0.1, max_depth: int = 3, min_leaf: int = 5,
                 weights=None) -> BoostingModel:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    w = check_weights(weights, len(y))
    spec = LearnerSpec("boosting", {"rounds": rounds, "rate": rate, "max_depth": max_depth,
                                    "min_leaf": min_leaf})
    init = float(w @ y / w.sum())
    F = np.full(len(y), init)
    grown = []
    for _ in range(rounds):
        tree = build_tree(X, y - F, w, max_depth, min_leaf)
        F += rate * tree.predict(X)
        grown.append(tree)
    return BoostingModel(spec, init, rate, grown, X.shape[1])
