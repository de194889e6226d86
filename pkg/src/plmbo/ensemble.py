"""Ensemble stage: stack per-member MBO outputs and classify with a random forest."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def concatenate_outputs(members_u, k: int | None = None) -> np.ndarray:
    """Column-stack the member outputs in family order.

    With two classes only the first column of each output is used.
    """
    mats = [np.asarray(u, dtype=np.float64) for u in members_u]
    if not mats:
        raise ValueError("need at least one member output")
    n = mats[0].shape[0]
    if any(m.ndim != 2 or m.shape[0] != n for m in mats):
        raise ValueError("member outputs have inconsistent row counts")
    k = mats[0].shape[1] if k is None else k
    if k == 2:
        return np.column_stack([m[:, 0] for m in mats])
    return np.hstack(mats)


def split_by_mask(x: np.ndarray, labels, mask):
    """``(x_train, y_train, x_test, y_test)``; rows keep their dataset order."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.asarray(labels)
    if mask.shape != (x.shape[0],) or labels.shape != mask.shape:
        raise ValueError("mask and labels need one entry per row")
    if not mask.any():
        raise ValueError("no labeled rows to train on")
    return x[mask], labels[mask], x[~mask], labels[~mask]


def accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    if pred.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    return float(np.mean(pred == truth))


@dataclass
class Tree:
    """Array-encoded binary tree. Leaves have ``feature == -1`` and store a
    class in ``value``; internal nodes send ``x[feature] <= threshold`` left."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[int] = field(default_factory=list)

    def _add(self, feature=-1, threshold=0.0, value=-1) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def predict(self, x: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = feat[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = x[idx, feat[nd]] <= thr[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = feat[node] >= 0
        return np.asarray(self.value)[node]


def _gini_best_split(x: np.ndarray, y: np.ndarray, n_classes: int, features: np.ndarray, min_leaf: int):
    """Best (feature, threshold, impurity) over ``features`` by weighted Gini.
    Ties go to the lower feature index, then the lower threshold."""
    n = y.size
    best = (np.inf, -1, 0.0)
    onehot = np.eye(n_classes)[y]
    for f in np.sort(features):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        counts = np.cumsum(onehot[order], axis=0)[:-1]  # left counts after i+1 rows
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        right = counts[-1] + onehot[order[-1]] - counts
        gl = 1.0 - np.sum(counts**2, axis=1) / n_left**2
        gr = 1.0 - np.sum(right**2, axis=1) / (n - n_left) ** 2
        score = (n_left * gl + (n - n_left) * gr) / n
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if score[i] < best[0] - 1e-12:
            best = (float(score[i]), int(f), float(0.5 * (xs[i] + xs[i + 1])))
    return best


def _majority(y: np.ndarray, n_classes: int) -> int:
    return int(np.argmax(np.bincount(y, minlength=n_classes)))


def fit_tree(x, y, n_classes, max_depth, min_leaf, max_features, rng) -> Tree:
    tree = Tree()
    root = tree._add(value=_majority(y, n_classes))
    stack = [(root, np.arange(y.size), 0)]
    n_feat = x.shape[1]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        if depth >= max_depth or rows.size < 2 * min_leaf or np.all(ys == ys[0]):
            continue
        feats = rng.choice(n_feat, size=max_features, replace=False)
        score, f, thr = _gini_best_split(x[rows], ys, n_classes, feats, min_leaf)
        if f < 0:
            continue
        go_left = x[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = tree._add(value=_majority(y[lrows], n_classes))
        tree.right[node] = tree._add(value=_majority(y[rrows], n_classes))
        stack.append((tree.right[node], rrows, depth + 1))
        stack.append((tree.left[node], lrows, depth + 1))
    return tree


@dataclass
class ForestModel:
    trees: list[Tree]
    n_classes: int
    n_features: int
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 1
    seed: int = 0

    def predict(self, x) -> np.ndarray:
        return forest_predict(self, x)

    def to_json(self) -> str:
        return json.dumps({
            "n_classes": self.n_classes, "n_features": self.n_features, "n_trees": self.n_trees,
            "max_depth": self.max_depth, "min_leaf": self.min_leaf, "seed": self.seed,
            "trees": [t.__dict__ for t in self.trees],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        d = json.loads(text)
        trees = [Tree(**t) for t in d.pop("trees")]
        return cls(trees=trees, **d)


def forest_fit(x, y, n_trees: int = 100, max_depth: int = 8, min_leaf: int = 1, seed: int = 0,
               n_classes: int | None = None, row_ids=None) -> ForestModel:
    """Bootstrap random forest with sqrt(F) features per split.

    Tree ``t`` draws from ``default_rng([seed, t])``. Bootstrap indices refer
    to rows sorted by ``row_ids`` (defaults to position), so permuting the
    training rows together with their ids leaves the model unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("x must be N x F with one label per row")
    if y.size == 0:
        raise ValueError("empty training set")
    if min(n_trees, max_depth, min_leaf) < 1:
        raise ValueError("n_trees, max_depth and min_leaf must be positive")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    canon = np.argsort(np.arange(y.size) if row_ids is None else np.asarray(row_ids), kind="stable")
    x, y = x[canon], y[canon]
    n, f = x.shape
    max_features = max(1, int(np.sqrt(f)))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        boot = np.sort(rng.integers(0, n, size=n))
        trees.append(fit_tree(x[boot], y[boot], n_classes, max_depth, min_leaf, max_features, rng))
    return ForestModel(trees, n_classes, f, n_trees, max_depth, min_leaf, seed)


def forest_predict(model: ForestModel, x) -> np.ndarray:
    """Majority vote over trees; ties go to the lower class id."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features")
    votes = np.zeros((x.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(x.shape[0])
    for t in model.trees:
        np.add.at(votes, (rows, t.predict(x)), 1)
    return np.argmax(votes, axis=1)
