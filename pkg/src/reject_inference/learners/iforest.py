"""Isolation forest used as a similarity model for reject filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329


def average_path_length(n) -> np.ndarray:
    """Expected path length of an unsuccessful BST search among ``n`` points."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    m = n[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return out


@dataclass(frozen=True)
class IsolationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # training points reaching each leaf

    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def path_length(self, X) -> np.ndarray:
        """Edges to the reached leaf plus the ``c(size)`` adjustment."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        edges = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                break
            r = rows[internal]
            nd = node[internal]
            go_left = X[r, self.feature[nd]] < self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            edges[r] += 1
        return edges + average_path_length(self.size[node])


@dataclass(frozen=True, eq=False)
class IsolationForestModel:
    trees: tuple
    subsample_size: int
    n_trees: int
    n_features: int

    def mean_path_length(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros(0)
        return np.mean([t.path_length(X) for t in self.trees], axis=0)

    def anomaly_score(self, X) -> np.ndarray:
        """``2 ** (-E[h(x)] / c(psi))``; close to 1 means anomalous."""
        c = float(average_path_length(self.subsample_size))
        return 2.0 ** (-self.mean_path_length(X) / c)


def _build_tree(X, rng, height_limit) -> IsolationTree:
    feature, threshold, left, right, size = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(len(idx))
        if depth >= height_limit or len(idx) <= 1:
            return node
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        candidates = np.flatnonzero(hi > lo)
        if len(candidates) == 0:
            return node
        j = int(candidates[rng.integers(len(candidates))])
        thr = float(rng.uniform(lo[j], hi[j]))
        if thr <= lo[j]:  # uniform() may return the lower bound exactly
            thr = float(np.nextafter(lo[j], hi[j]))
        go_left = sub[:, j] < thr
        feature[node], threshold[node] = j, thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return IsolationTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        size=np.array(size, dtype=float),
    )


def fit_isolation_forest(X, n_trees: int = 100, subsample_size: int | None = None,
                         seed: int = 0) -> IsolationForestModel:
    """Grow ``n_trees`` isolation trees, each on a random subsample without replacement.

    ``subsample_size`` defaults to ``min(256, n)``; tree height is capped at
    ``ceil(log2(subsample_size))``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    psi = min(256, n) if subsample_size is None else int(subsample_size)
    if psi > n:
        raise ValueError(f"subsample_size={psi} exceeds n={n}")
    if psi < 2:
        raise ValueError("subsample_size must be >= 2")
    limit = math.ceil(math.log2(psi))
    rng = np.random.default_rng(seed)
    trees = tuple(
        _build_tree(X[rng.choice(n, size=psi, replace=False)], rng, limit)
        for _ in range(n_trees)
    )
    return IsolationForestModel(trees=trees, subsample_size=psi, n_trees=n_trees, n_features=X.shape[1])


def similarity_score(model: IsolationForestModel, X) -> np.ndarray:
    """``1 - anomaly_score``: higher means closer to the training distribution."""
    return 1.0 - model.anomaly_score(X)
