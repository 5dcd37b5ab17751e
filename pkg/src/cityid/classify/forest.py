"""Random forest of unpruned CART trees (Gini impurity, bootstrap rows,
sqrt(D) candidate features per split)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, SingleClassData, ValidationError
from .data import FrameDataset, cap_frames

LEAF = -1


@dataclass
class Tree:
    """Flat array tree. Internal nodes route ``x[feature] <= threshold`` left."""

    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, C) class counts of the training rows reaching each node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.apply(X)]
        return c / c.sum(axis=1, keepdims=True)


@dataclass
class ForestModel:
    trees: list
    classes: tuple
    n_features: int
    seed: int
    feature_kind: str = "statistical"
    n_train_rows: int = 0
    info: dict = field(default_factory=dict)


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray, n_classes: int):
    """Lowest weighted Gini split over ``feats``; None if every candidate is constant."""
    n = X.shape[0]
    cols = X[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    onehot = np.zeros((n, len(feats), n_classes))
    np.put_along_axis(onehot, y[order][..., None], 1.0, axis=2)
    left = np.cumsum(onehot, axis=0)[:-1]  # split after position i: rows 0..i go left
    total = left[-1] + onehot[-1]
    right = total - left
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    # n_l * gini_l + n_r * gini_r  ==  n - sum(l^2)/n_l - sum(r^2)/n_r
    impurity = n - (left ** 2).sum(axis=2) / nl - (right ** 2).sum(axis=2) / nr
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    impurity = np.where(valid, impurity, np.inf)
    pos, j = np.unravel_index(np.argmin(impurity), impurity.shape)
    lo, hi = xs[pos, j], xs[pos + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(feats[j]), float(thr)


def _grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_features: int, rng) -> Tree:
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.bincount(y[idx], minlength=n_classes).astype(np.float64))
        return len(feature) - 1

    n_total = X.shape[1]
    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) < 2 or np.count_nonzero(counts[node]) < 2:
            continue
        perm = rng.permutation(n_total)
        split = _best_split(X[idx], y[idx], perm[:max_features], n_classes)
        if split is None and max_features < n_total:
            split = _best_split(X[idx], y[idx], perm[max_features:], n_classes)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(li), new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts),
    )


def train_random_forest(
    data: FrameDataset,
    n_trees: int = 100,
    seed: int = 0,
    max_frames_per_video: int | None = None,
    max_features: int | None = None,
) -> ForestModel:
    if n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    data = cap_frames(data, max_frames_per_video, seed)
    X, y = data.X, data.y
    n, d = X.shape
    n_classes = len(data.classes)
    if len(np.unique(y)) < 2:
        warnings.warn("training data has a single class; the forest is a constant predictor", SingleClassData, stacklevel=2)
    m = max_features or max(1, int(np.floor(np.sqrt(d))))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], n_classes, m, rng))
    return ForestModel(trees, data.classes, d, seed, data.feature_kind, n,
                       {"max_features": m, "max_frames_per_video": max_frames_per_video or 0})


def predict_forest(model: ForestModel, X) -> np.ndarray:
    """Mean over trees of the leaf class-frequency distribution."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"rows have width {X.shape[-1]}, forest expects {model.n_features}")
    p = np.zeros((X.shape[0], len(model.classes)))
    for tree in model.trees:
        p += tree.predict_proba(X)
    return p / len(model.trees)
