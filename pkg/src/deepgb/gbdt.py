"""Least-squares gradient boosting of depth-limited regression trees.

Splits are searched exhaustively over midpoints between consecutive distinct
feature values. Gains within a relative tolerance of the best are treated as
ties and resolved by lowest feature index, then lowest threshold, so the
chosen tree does not depend on floating-point summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from deepgb.errors import ConfigError, ShapeError

# gains closer than this fraction of the node SSE count as equal
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 800
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")


@dataclass
class RegressionTree:
    """Binary tree stored as parallel preorder arrays.

    ``feature[i] == -1`` marks a leaf. Routing is ``x <= threshold`` -> left.
    """

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def _add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = feature[node]
            active = f >= 0
            if not active.any():
                break
            r, nd = rows[active], node[active]
            go_left = X[r, f[active]] <= threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])
        return np.asarray(self.value, dtype=np.float64)[node]


def exact_mean(values) -> float:
    """Order-independent mean (correctly rounded sum)."""
    return math.fsum(values) / len(values)


def best_split(X: np.ndarray, r: np.ndarray, min_samples_leaf: int = 1):
    """Best (feature, threshold, gain) by SSE reduction, or ``None``.

    ``gain`` is ``SSE(parent) - SSE(left) - SSE(right)``.
    """
    n, n_features = X.shape
    total = r.sum()
    parent_sse = float(np.sum((r - total / n) ** 2))
    if n < 2 * min_samples_leaf or parent_sse <= 0.0:
        return None
    candidates = []  # (gain, feature, threshold)
    for f in range(n_features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        rs = r[order]
        csum = np.cumsum(rs)[:-1]
        n_left = np.arange(1, n)
        valid = xs[1:] != xs[:-1]
        valid &= (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
        if not valid.any():
            continue
        pos = np.flatnonzero(valid)
        sl = csum[pos]
        nl = n_left[pos]
        gain = sl * sl / nl + (total - sl) ** 2 / (n - nl) - total * total / n
        thresholds = (xs[pos] + xs[pos + 1]) / 2.0
        k = int(np.argmax(gain))
        # keep every near-best threshold of this feature for the global tie-break
        near = np.flatnonzero(gain >= gain[k] - TIE_RTOL * parent_sse)
        candidates.extend((float(gain[i]), f, float(thresholds[i])) for i in near)
    if not candidates:
        return None
    best_gain = max(c[0] for c in candidates)
    if best_gain <= TIE_RTOL * parent_sse:
        return None
    tied = [c for c in candidates if c[0] >= best_gain - TIE_RTOL * parent_sse]
    gain, f, thr = min(tied, key=lambda c: (c[1], c[2]))
    return f, thr, gain


def fit_tree(X, residuals, max_depth: int = 3, min_samples_leaf: int = 1) -> RegressionTree:
    """Greedy least-squares CART tree; leaves hold the mean residual."""
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if len(r) < 1 or X.shape[0] != len(r):
        raise ShapeError(f"fit_tree needs >= 1 sample and matching lengths, got {X.shape} / {r.shape}")
    tree = RegressionTree()

    def grow(idx: np.ndarray, depth: int) -> int:
        node = tree._add()
        sub = r[idx]
        tree.value[node] = exact_mean(sub)
        if depth >= max_depth or len(idx) < 2:
            return node
        split = best_split(X[idx], sub, min_samples_leaf)
        if split is None:
            return node
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(idx[go_left], depth + 1)
        tree.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(r)), 0)
    return tree


@dataclass
class GbdtModel:
    base: float
    trees: list
    learning_rate: float
    n_features: int

    def predict(self, X) -> np.ndarray:
        return gbdt_predict(self, X)


def gbdt_fit(X, target, config: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Plain least-squares boosting: base = mean target, then ``n_trees`` shrunk trees."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(target, dtype=np.float64)
    if len(y) == 0:
        raise ShapeError("cannot fit a tree ensemble on an empty dataset")
    if X.shape[0] != len(y):
        raise ShapeError(f"{X.shape[0]} feature rows for {len(y)} targets")
    base = exact_mean(y)
    residual = y - base
    trees = []
    for _ in range(config.n_trees):
        tree = fit_tree(X, residual, config.max_depth, config.min_samples_leaf)
        trees.append(tree)
        residual = residual - config.learning_rate * tree.predict(X)
    return GbdtModel(base, trees, config.learning_rate, X.shape[1])


def gbdt_predict(model: GbdtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != model.n_features:
        raise ShapeError(f"model was trained on {model.n_features} features, got {X.shape[1]}")
    out = np.full(len(X), model.base, dtype=np.float64)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(X)
    return out
