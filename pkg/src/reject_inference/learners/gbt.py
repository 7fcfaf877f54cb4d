"""Gradient-boosted regression trees for binary logistic loss.

Trees are grown level by level. Split search is an exact greedy scan over
presorted feature values, leaf weights are Newton steps
``-G / (H + reg_lambda)``, and ties between equally good splits go to the
lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy.special import expit

# A validation round only counts as an improvement if it beats the best
# loss by more than this; guards against float noise in flat regions.
_MIN_IMPROVEMENT = 1e-12
_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GbtParams:
    max_trees: int = 500
    early_stopping_rounds: int = 25
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    subsample: float = 1.0
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.max_trees < 1:
            raise ValueError("max_trees must be >= 1")
        if self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")

    def replace(self, **kw) -> GbtParams:
        return GbtParams(**{**asdict(self), **kw})


@dataclass(frozen=True)
class Tree:
    """Array-encoded regression tree. Leaves have ``feature == -1``.

    ``value`` already includes the learning-rate shrinkage.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        return _predict_tree(np.asarray(X, dtype=float), self.feature, self.threshold,
                             self.left, self.right, self.value)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}


@dataclass(frozen=True, eq=False)
class GbtModel:
    trees: tuple
    base_score: float
    learning_rate: float
    best_iteration: int
    n_features: int
    train_loss: tuple = ()
    valid_loss: tuple = ()

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return X

    def predict_raw(self, X, n_trees: int | None = None) -> np.ndarray:
        """Log-odds margin using the first ``n_trees`` trees (default: best_iteration)."""
        X = self._check(X)
        t = self.best_iteration if n_trees is None else n_trees
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees[:t]:
            out += tree.predict(X)
        return out

    def predict_proba(self, X, n_trees: int | None = None) -> np.ndarray:
        return expit(self.predict_raw(X, n_trees))

    def staged_predict_proba(self, X):
        X = self._check(X)
        raw = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            raw = raw + tree.predict(X)
            yield expit(raw)

    def to_dict(self) -> dict:
        return {
            "kind": "gbt",
            "version": 1,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "best_iteration": self.best_iteration,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }


@njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def _best_splits(xs, order, g, h, slot, n_slots, G, H, reg_lambda, min_child_weight):
    """Best (feature, threshold) per active node; feature -1 means no useful split.

    ``xs[j]`` holds feature ``j`` sorted ascending and ``order[j]`` the
    matching row indices. ``slot[i]`` is the active-node slot of row ``i``,
    or -1 when the row sits in a finished node or was not sampled.
    """
    d, n = xs.shape
    best_gain = np.full(n_slots, _MIN_GAIN)
    best_feat = np.full(n_slots, -1, dtype=np.int64)
    best_thr = np.zeros(n_slots)
    parent = np.empty(n_slots)
    for s in range(n_slots):
        parent[s] = G[s] * G[s] / (H[s] + reg_lambda)
    GL = np.empty(n_slots)
    HL = np.empty(n_slots)
    last = np.empty(n_slots)
    seen = np.empty(n_slots, dtype=np.bool_)
    for j in range(d):
        GL[:] = 0.0
        HL[:] = 0.0
        seen[:] = False
        for r in range(n):
            i = order[j, r]
            s = slot[i]
            if s < 0:
                continue
            x = xs[j, r]
            if seen[s] and x > last[s]:
                hl = HL[s]
                hr = H[s] - hl
                if hl >= min_child_weight and hr >= min_child_weight:
                    gl = GL[s]
                    gr = G[s] - gl
                    gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent[s])
                    if gain > best_gain[s]:
                        thr = last[s] + 0.5 * (x - last[s])
                        if thr >= x:
                            thr = last[s]
                        best_gain[s] = gain
                        best_feat[s] = j
                        best_thr[s] = thr
            GL[s] += g[i]
            HL[s] += h[i]
            last[s] = x
            seen[s] = True
    return best_feat, best_thr


def _grow_tree(X, xs, order, g, h, in_sample, p: GbtParams) -> Tree:
    n = X.shape[0]
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    node_of = np.where(in_sample, 0, -1)
    active = [0]
    for _depth in range(p.max_depth):
        if not active:
            break
        slot_of_node = {node: s for s, node in enumerate(active)}
        slot = np.full(n, -1, dtype=np.int64)
        mask = node_of >= 0
        lookup = np.full(len(feature), -1, dtype=np.int64)
        for node, s in slot_of_node.items():
            lookup[node] = s
        slot[mask] = lookup[node_of[mask]]
        valid = slot >= 0
        G = np.bincount(slot[valid], weights=g[valid], minlength=len(active))
        H = np.bincount(slot[valid], weights=h[valid], minlength=len(active))
        feats, thrs = _best_splits(xs, order, g, h, slot, len(active), G, H,
                                   p.reg_lambda, p.min_child_weight)
        next_active = []
        for s, node in enumerate(active):
            if feats[s] < 0:
                continue
            lo, hi = len(feature), len(feature) + 1
            feature[node], threshold[node] = int(feats[s]), float(thrs[s])
            left[node], right[node] = lo, hi
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            value += [0.0, 0.0]
            rows = np.flatnonzero(node_of == node)
            goes_left = X[rows, feats[s]] <= thrs[s]
            node_of[rows[goes_left]] = lo
            node_of[rows[~goes_left]] = hi
            next_active += [lo, hi]
        active = next_active

    feature = np.array(feature, dtype=np.int64)
    mask = node_of >= 0
    G = np.bincount(node_of[mask], weights=g[mask], minlength=len(feature))
    H = np.bincount(node_of[mask], weights=h[mask], minlength=len(feature))
    leaf_value = np.where(feature < 0, -G / (H + p.reg_lambda), 0.0) * p.learning_rate
    return Tree(
        feature=feature,
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=leaf_value,
    )


def _logloss(raw, y) -> float:
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def fit_gbt(X, y, params: GbtParams = GbtParams(), validation=None, seed: int = 0) -> GbtModel:
    """Fit boosted trees on logistic loss.

    Parameters
    ----------
    X, y : training features and {0, 1} labels (1 = Bad).
    params : GbtParams
    validation : (X_val, y_val) or None
        When given, boosting stops once validation log-loss has not improved
        for ``params.early_stopping_rounds`` rounds, and ``best_iteration``
        marks the best round. Without it all ``max_trees`` rounds run.
    seed : int
        Drives row subsampling; irrelevant when ``subsample == 1``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be (n, d) with one label per row")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")

    Xv = yv = None
    if validation is not None:
        Xv = np.ascontiguousarray(validation[0], dtype=float)
        yv = np.asarray(validation[1], dtype=float)
        if len(yv) == 0:
            raise ValueError("validation set is empty")
        if Xv.ndim != 2 or Xv.shape[1] != X.shape[1]:
            raise ValueError("validation columns do not match training columns")

    n = X.shape[0]
    rate = y.mean()
    base = float(np.log(rate / (1 - rate)))
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    xs = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    rng = np.random.default_rng(seed)

    raw = np.full(n, base)
    raw_v = None if Xv is None else np.full(len(yv), base)
    trees, train_loss, valid_loss = [], [], []
    best_loss, best_round = np.inf, 0
    in_sample = np.ones(n, dtype=bool)

    for rnd in range(1, params.max_trees + 1):
        prob = expit(raw)
        g = prob - y
        h = prob * (1 - prob)
        if params.subsample < 1:
            in_sample = rng.random(n) < params.subsample
        tree = _grow_tree(X, xs, order, g, h, in_sample, params)
        trees.append(tree)
        raw = raw + tree.predict(X)
        train_loss.append(_logloss(raw, y))
        if raw_v is not None:
            raw_v = raw_v + tree.predict(Xv)
            loss_v = _logloss(raw_v, yv)
            valid_loss.append(loss_v)
            if loss_v < best_loss - _MIN_IMPROVEMENT:
                best_loss, best_round = loss_v, rnd
            elif rnd - best_round >= params.early_stopping_rounds:
                break

    best = best_round if raw_v is not None else len(trees)
    return GbtModel(
        trees=tuple(trees),
        base_score=base,
        learning_rate=params.learning_rate,
        best_iteration=best,
        n_features=X.shape[1],
        train_loss=tuple(train_loss),
        valid_loss=tuple(valid_loss),
    )


def fit_gbt_early_stopped(X, y, params: GbtParams, seed: int, valid_fraction: float = 0.2) -> GbtModel:
    """Fit with early stopping on a stratified split carved from ``(X, y)``."""
    from ..data import stratified_split

    y = np.asarray(y)
    fit_idx, val_idx = stratified_split(y, 1 - valid_fraction, seed)
    if len(val_idx) == 0 or len(np.unique(y[fit_idx])) < 2:
        return fit_gbt(X, y, params.replace(max_trees=min(params.max_trees, 100)), seed=seed)
    X = np.asarray(X, dtype=float)
    return fit_gbt(X[fit_idx], y[fit_idx], params, validation=(X[val_idx], y[val_idx]), seed=seed)
