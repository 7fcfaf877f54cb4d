"""Reject-inference strategies.

Every strategy takes the labeled accepts and the unlabeled rejects and
returns an :class:`AugmentedTrainingSet`: the accepts, untouched, followed
by whichever rejects the strategy chose to label.

``scorer`` arguments accept either :class:`GbtParams` (boosted trees fitted
with early stopping on an internal split) or any callable
``scorer(X, y, seed) -> model`` with a ``predict_proba`` method.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import BAD, GOOD, CreditDataset, stratified_kfold, stratified_split
from .filtering import FilterConfig, filter_rejects
from .learners import GbtParams, fit_gbt_early_stopped, fit_l1_logistic
from .metrics import auc


class Provenance(enum.IntEnum):
    ORIGINAL_ACCEPT = 0
    INFERRED_GOOD = 1
    INFERRED_BAD = 2


class DegenerateThresholdWarning(UserWarning):
    """First-iteration labeler scores gave ``c_g >= c_b``; no rejects were labeled."""


@dataclass(frozen=True, eq=False)
class AugmentedTrainingSet:
    dataset: CreditDataset
    provenance: np.ndarray
    iterations_used: int = 0
    trace: tuple = field(default=(), repr=False)

    @property
    def n_inferred(self) -> int:
        return int((self.provenance != Provenance.ORIGINAL_ACCEPT).sum())


def _augment(accepts: CreditDataset, parts, iterations=0, trace=()) -> AugmentedTrainingSet:
    """``parts`` is a list of (reject subset, 0/1 label array)."""
    parts = [(ds, np.asarray(y, dtype=np.int8)) for ds, y in parts if ds.n]
    data = CreditDataset.concat([accepts] + [ds.with_labels(y) for ds, y in parts])
    prov = [np.full(accepts.n, Provenance.ORIGINAL_ACCEPT, dtype=np.int8)]
    prov += [np.where(y == BAD, Provenance.INFERRED_BAD, Provenance.INFERRED_GOOD).astype(np.int8)
             for _, y in parts]
    return AugmentedTrainingSet(data, np.concatenate(prov), iterations, tuple(trace))


def _need_pd_threshold(threshold):
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")


def tail_count(fraction: float, m: int) -> int:
    """Cases in a ``fraction`` tail of ``m`` scores (at least one if fraction > 0)."""
    if fraction <= 0 or m == 0:
        return 0
    return min(m, math.ceil(fraction * m - 1e-9))


def fit_scorer(ds: CreditDataset, scorer, seed: int):
    if isinstance(scorer, GbtParams):
        return fit_gbt_early_stopped(ds.features, ds.labels, scorer, seed)
    return scorer(ds.features, ds.labels, seed)


def ignore_rejects(accepts: CreditDataset, rejects: CreditDataset) -> AugmentedTrainingSet:
    return _augment(accepts, [])


def label_all_bad(accepts: CreditDataset, rejects: CreditDataset) -> AugmentedTrainingSet:
    return _augment(accepts, [(rejects, np.full(rejects.n, BAD))])


def hard_cutoff(accepts, rejects, threshold: float, scorer=GbtParams(), seed: int = 0):
    """Label a reject Bad when the accepts-trained scorer puts its PD above ``threshold``."""
    _need_pd_threshold(threshold)
    if rejects.n == 0:
        return _augment(accepts, [])
    model = fit_scorer(accepts, scorer, seed)
    pd_r = model.predict_proba(rejects.features)
    return _augment(accepts, [(rejects, (pd_r > threshold).astype(np.int8))])


def parcelling(accepts, rejects, n_batches: int = 10, multiplier: float = 1.0,
               scorer=GbtParams(), seed: int = 0):
    """Label rejects at random within score bands.

    Bands are equal-frequency bins of the accepts' scores. A reject in a
    band whose accepts default at rate ``r`` is labeled Bad with
    probability ``min(1, r * multiplier)``. Bands left without accepts
    (tied quantile edges) borrow the rate of the nearest populated band.
    """
    if n_batches < 2:
        raise ValueError("n_batches must be >= 2")
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    if rejects.n == 0:
        return _augment(accepts, [])
    model = fit_scorer(accepts, scorer, seed)
    pd_a = model.predict_proba(accepts.features)
    pd_r = model.predict_proba(rejects.features)
    edges = np.unique(np.quantile(pd_a, np.arange(1, n_batches) / n_batches))
    band_a = np.searchsorted(edges, pd_a, side="left")
    band_r = np.searchsorted(edges, pd_r, side="left")
    n_bands = len(edges) + 1
    counts = np.bincount(band_a, minlength=n_bands)
    bads = np.bincount(band_a, weights=accepts.labels, minlength=n_bands)
    populated = np.flatnonzero(counts)
    rate = np.empty(n_bands)
    for b in range(n_bands):
        src = b if counts[b] else populated[np.argmin(np.abs(populated - b))]
        rate[b] = bads[src] / counts[src]
    p_bad = np.minimum(1.0, rate[band_r] * multiplier)
    rng = np.random.default_rng(seed)
    labels = (rng.random(rejects.n) < p_bad).astype(np.int8)
    return _augment(accepts, [(rejects, labels)])


def cv_voting(accepts, rejects, n_folds: int = 5, threshold: float = 0.3,
              scorer=GbtParams(), seed: int = 0):
    """Hard-cutoff labels from one scorer per training fold; keep unanimous rejects only."""
    _need_pd_threshold(threshold)
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    if rejects.n == 0:
        return _augment(accepts, [])
    folds = stratified_kfold(accepts, n_folds, seed)
    votes = np.empty((n_folds, rejects.n), dtype=bool)
    for i in range(n_folds):
        train, _ = folds.train_test(i)
        model = fit_scorer(accepts.subset(train), scorer, seed + 1 + i)
        votes[i] = model.predict_proba(rejects.features) > threshold
    all_bad = votes.all(axis=0)
    all_good = ~votes.any(axis=0)
    keep = all_bad | all_good
    return _augment(accepts, [(rejects.subset(keep), all_bad[keep].astype(np.int8))])


def _split_tails(scores, k_good, k_bad):
    order = np.argsort(scores, kind="stable")
    goods = order[:k_good]
    rest = order[k_good:]
    bads = rest[len(rest) - min(k_bad, len(rest)):]
    return goods, bads


def regular_self_learning(accepts, rejects, percentage: float = 0.01, max_iterations: int = 5,
                          scorer=GbtParams(), seed: int = 0):
    """Classic self-training with the scoring model as its own labeler.

    Each round retrains on the current pool and labels the ``percentage``
    lowest-PD remaining rejects Good and the ``percentage`` highest-PD
    ones Bad. Tail sizes are recomputed from the remaining pool each round.
    """
    if not 0 < percentage < 0.5:
        raise ValueError("percentage must be in (0, 0.5)")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    pool, remaining = accepts, rejects
    parts, trace = [], []
    it = 0
    for it in range(1, max_iterations + 1):
        if remaining.n == 0:
            it -= 1
            break
        model = fit_scorer(pool, scorer, seed + it)
        scores = model.predict_proba(remaining.features)
        k = tail_count(percentage, remaining.n)
        goods, bads = _split_tails(scores, k, k)
        chosen = np.concatenate([goods, bads])
        labels = np.concatenate([np.full(len(goods), GOOD), np.full(len(bads), BAD)]).astype(np.int8)
        picked = remaining.subset(chosen)
        parts.append((picked, labels))
        pool = CreditDataset.concat([pool, picked.with_labels(labels)])
        keep = np.ones(remaining.n, dtype=bool)
        keep[chosen] = False
        remaining = remaining.subset(keep)
        trace.append({"iteration": it, "pool_size": pool.n, "remaining": remaining.n,
                      "n_good": len(goods), "n_bad": len(bads)})
    return _augment(accepts, parts, iterations=it, trace=trace)


@dataclass(frozen=True)
class ShallowConfig:
    """Settings for shallow self-learning.

    alpha : share of the first-round reject score distribution below the Good threshold.
    theta : imbalance multiplier; ``alpha * theta`` is the share above the Bad threshold.
    lam : labeler L1 penalty; ``None`` tunes it on the first round over ``lam_grid``.
    """

    alpha: float = 0.02
    theta: float = 2.0
    lam: float | None = None
    max_iterations: int = 5
    filter: FilterConfig = FilterConfig()
    lam_grid: tuple = (0.001, 0.01, 0.1, 1.0)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if self.alpha * self.theta >= 1:
            raise ValueError("alpha * theta must be < 1")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def tune_lambda(accepts: CreditDataset, grid, seed: int, valid_fraction: float = 0.25) -> float:
    """Penalty from ``grid`` with the best AUC on a stratified split of ``accepts``."""
    fit_idx, val_idx = stratified_split(accepts.labels, 1 - valid_fraction, seed)
    y_fit, y_val = accepts.labels[fit_idx], accepts.labels[val_idx]
    if len(np.unique(y_fit)) < 2 or len(np.unique(y_val)) < 2:
        return float(grid[len(grid) // 2])
    best, best_auc = grid[0], -np.inf
    for lam in grid:
        m = fit_l1_logistic(accepts.features[fit_idx], y_fit, lam)
        a = auc(y_val, m.predict_proba(accepts.features[val_idx]))
        if a > best_auc:
            best, best_auc = lam, a
    return float(best)


def shallow_self_learning(accepts, rejects, cfg: ShallowConfig = ShallowConfig(), seed: int = 0):
    """Self-learning with an L1-logistic labeler, fixed thresholds and pre-filtering.

    1. Drop reject outliers and near-duplicates of the accepts (isolation forest).
    2. Fit the labeler on the labeled pool and score the remaining rejects.
       On the first round only, fix ``c_g`` and ``c_b`` so that ``alpha`` of
       the scores lie below ``c_g`` and ``alpha * theta`` above ``c_b``.
    3. Rejects below ``c_g`` join the pool as Good, above ``c_b`` as Bad.
    4. Repeat until no remaining reject crosses a threshold, the rejects run
       out, or ``max_iterations`` rounds have run.
    """
    if accepts.n == 0 or len(np.unique(accepts.labels)) < 2:
        raise ValueError("accepts need both classes")
    if rejects.n == 0:
        raise ValueError("rejects are empty")

    remaining = filter_rejects(accepts, rejects, cfg.filter, seed).retained
    lam = cfg.lam if cfg.lam is not None else tune_lambda(accepts, cfg.lam_grid, seed)

    pool = accepts
    parts, trace = [], []
    c_g = c_b = None
    labeler = None
    iterations = 0
    for it in range(1, cfg.max_iterations + 1):
        if remaining.n == 0:
            break
        labeler = fit_l1_logistic(pool.features, pool.labels, lam, init=labeler)
        f = labeler.predict_proba(remaining.features)
        if c_g is None:
            m = remaining.n
            s = np.sort(f)
            k_g = tail_count(cfg.alpha, m)
            k_b = tail_count(cfg.alpha * cfg.theta, m)
            c_g = float(s[k_g]) if k_g < m else float("inf")
            c_b = float(s[m - 1 - k_b]) if k_b < m else float("-inf")
            if c_g >= c_b:
                warnings.warn(
                    f"labeler thresholds collapsed (c_g={c_g:.6g} >= c_b={c_b:.6g}); "
                    "returning the accepts unchanged",
                    DegenerateThresholdWarning,
                    stacklevel=2,
                )
                trace.append({"iteration": it, "pool_size": pool.n, "remaining": remaining.n,
                              "lam": lam, "c_g": c_g, "c_b": c_b, "n_good": 0, "n_bad": 0,
                              "degenerate": True})
                return _augment(accepts, [], iterations=0, trace=trace)
        is_good = f < c_g
        is_bad = f > c_b
        n_good, n_bad = int(is_good.sum()), int(is_bad.sum())
        if n_good + n_bad == 0:
            trace.append({"iteration": it, "pool_size": pool.n, "remaining": remaining.n,
                          "lam": lam, "c_g": c_g, "c_b": c_b, "n_good": 0, "n_bad": 0})
            break
        chosen = is_good | is_bad
        picked = remaining.subset(chosen)
        labels = is_bad[chosen].astype(np.int8)
        parts.append((picked, labels))
        pool = CreditDataset.concat([pool, picked.with_labels(labels)])
        remaining = remaining.subset(~chosen)
        iterations = it
        trace.append({"iteration": it, "pool_size": pool.n, "remaining": remaining.n,
                      "lam": lam, "c_g": c_g, "c_b": c_b, "n_good": n_good, "n_bad": n_bad})
    return _augment(accepts, parts, iterations=iterations, trace=trace)


# --- strategy specs -------------------------------------------------------

KINDS = (
    "ignore_rejects",
    "label_all_bad",
    "hard_cutoff",
    "parcelling",
    "cv_voting",
    "regular_self_learning",
    "shallow_self_learning",
)

# kind -> {param: (type, default)}
PARAM_SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "ignore_rejects": {},
    "label_all_bad": {},
    "hard_cutoff": {"threshold": (float, 0.5)},
    "parcelling": {"multiplier": (float, 1.0), "n_batches": (int, 10)},
    "cv_voting": {"threshold": (float, 0.3), "n_folds": (int, 5)},
    "regular_self_learning": {"percentage": (float, 0.01), "max_iterations": (int, 5)},
    "shallow_self_learning": {
        "percentage": (float, 0.02),
        "multiplier": (float, 2.0),
        "max_iterations": (int, 5),
        "filtered_percentage": (float, 0.0),
        "lam": (float, None),
    },
}


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    params: tuple = ()  # sorted (name, value) pairs; hashable

    def __post_init__(self):
        if self.kind not in PARAM_SCHEMA:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        schema = PARAM_SCHEMA[self.kind]
        given = dict(self.params)
        unknown = set(given) - set(schema)
        if unknown:
            raise ValueError(f"{self.kind}: unknown parameter(s) {sorted(unknown)}")
        full = {}
        for name, (typ, default) in schema.items():
            v = given.get(name, default)
            if v is not None:
                if typ is int and (isinstance(v, bool) or float(v) != int(v)):
                    raise ValueError(f"{self.kind}.{name} must be an integer, got {v!r}")
                v = typ(v)
            full[name] = v
        object.__setattr__(self, "params", tuple(sorted(full.items())))

    @classmethod
    def make(cls, kind: str, **params) -> StrategySpec:
        return cls(kind, tuple(params.items()))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def label(self) -> str:
        shown = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.params if v is not None)
        return f"{self.kind}({shown})" if shown else self.kind

    def shallow_config(self) -> ShallowConfig:
        p = self.param_dict
        return ShallowConfig(
            alpha=p["percentage"],
            theta=p["multiplier"],
            lam=p["lam"],
            max_iterations=p["max_iterations"],
            filter=FilterConfig.from_total(p["filtered_percentage"]),
        )


def apply_strategy(spec: StrategySpec, accepts: CreditDataset, rejects: CreditDataset,
                   scorer=GbtParams(), seed: int = 0, tuned_lam: float | None = None) -> AugmentedTrainingSet:
    """Run ``spec``. ``tuned_lam`` stands in for a shallow spec's unset ``lam``,
    so several variants on the same accepts can share one tuning pass."""
    p = spec.param_dict
    if spec.kind == "ignore_rejects":
        return ignore_rejects(accepts, rejects)
    if spec.kind == "label_all_bad":
        return label_all_bad(accepts, rejects)
    if spec.kind == "hard_cutoff":
        return hard_cutoff(accepts, rejects, p["threshold"], scorer, seed)
    if spec.kind == "parcelling":
        return parcelling(accepts, rejects, p["n_batches"], p["multiplier"], scorer, seed)
    if spec.kind == "cv_voting":
        return cv_voting(accepts, rejects, p["n_folds"], p["threshold"], scorer, seed)
    if spec.kind == "regular_self_learning":
        return regular_self_learning(accepts, rejects, p["percentage"], p["max_iterations"], scorer, seed)
    if rejects.n == 0:
        return ignore_rejects(accepts, rejects)
    cfg = spec.shallow_config()
    if cfg.lam is None and tuned_lam is not None:
        cfg = dataclasses.replace(cfg, lam=float(tuned_lam))
    return shallow_self_learning(accepts, rejects, cfg, seed)


def table3_grid() -> list[StrategySpec]:
    """The benchmark grid: 26 concrete strategy configurations."""
    make = StrategySpec.make
    grid = [make("ignore_rejects"), make("label_all_bad")]
    grid += [make("hard_cutoff", threshold=t) for t in (0.3, 0.4, 0.5)]
    grid += [make("parcelling", multiplier=m, n_batches=10) for m in (1.0, 2.0, 3.0)]
    grid += [make("cv_voting", threshold=0.3, n_folds=k) for k in (2, 5, 10)]
    grid += [make("regular_self_learning", percentage=p, max_iterations=5) for p in (0.01, 0.02, 0.03)]
    grid += shallow_grid()
    return grid


def shallow_grid(filtered=(0.0, 2.0), percentages=(0.01, 0.02, 0.03), multipliers=(1.0, 2.0),
                 max_iterations: int = 5) -> list[StrategySpec]:
    return [
        StrategySpec.make("shallow_self_learning", filtered_percentage=f, percentage=p,
                          multiplier=m, max_iterations=max_iterations)
        for f in filtered for p in percentages for m in multipliers
    ]

