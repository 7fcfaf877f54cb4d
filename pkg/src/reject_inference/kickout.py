"""Kickout evaluation of a reject-inference strategy without reject labels.

A scorer trained on part of the accepts picks the pool A1 it would accept
from the held-out accepts. A second scorer, trained after the strategy
has labeled part of the rejects, picks A2 from the held-out accepts plus
the held-out rejects. Only cases leaving A1 are counted, and all of them
are accepts with known labels.

By default A2 has the size of A1, so every reject entering A2 replaces an
accept. ``a2_size="rate"`` instead applies ``mu`` to the combined pool,
which lets rejects join without displacing anyone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CreditDataset, PartitionedData, random_split, stratified_split
from .learners import GbtParams
from .metrics import kickout_from_pools
from .strategies import StrategySpec, apply_strategy, fit_scorer


@dataclass(frozen=True)
class KickoutProtocolConfig:
    mu: float = 0.7
    accept_split: float = 0.7
    reject_split: float = 0.7
    scorer: GbtParams = GbtParams()
    seed: int = 0
    a2_size: str = "match"  # "match": |A2| = |A1|; "rate": mu of the combined pool

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValueError("mu must be in (0, 1]")
        if self.a2_size not in ("match", "rate"):
            raise ValueError(f"a2_size must be 'match' or 'rate', got {self.a2_size!r}")
        for name in ("accept_split", "reject_split"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in (0, 1]")


@dataclass(frozen=True)
class KickoutResult:
    value: float | None  # None when A1 holds no Bad (or only Bad) cases
    k_bad: int
    k_good: int
    s_bad: int
    a1_size: int
    a2_size: int
    rejects_in_a2: int


def accept_lowest(scores, mu: float, k: int | None = None) -> np.ndarray:
    """Indices of the ``floor(mu * n)`` (or ``k``) lowest scores; ties resolved by position."""
    if k is None:
        k = math.floor(mu * len(scores) + 1e-9)
    return np.argsort(np.asarray(scores), kind="stable")[:k]


def kickout_protocol(partition: PartitionedData, strategy, cfg: KickoutProtocolConfig = KickoutProtocolConfig(),
                     strategy_seed: int | None = None) -> KickoutResult:
    """Run the kickout procedure for one strategy.

    ``strategy`` is a :class:`StrategySpec` or a callable
    ``(accepts, rejects, seed) -> AugmentedTrainingSet``.
    """
    acc, rej = partition.accepts, partition.rejects
    if acc.n == 0:
        raise ValueError("accepts are empty")
    seed = cfg.seed
    a_tr_idx, a_ho_idx = stratified_split(acc.labels, cfg.accept_split, seed)
    r_tr_idx, r_ho_idx = random_split(rej.n, cfg.reject_split, seed + 1)
    a_train, a_hold = acc.subset(a_tr_idx), acc.subset(a_ho_idx)
    r_train, r_hold = rej.subset(r_tr_idx), rej.subset(r_ho_idx)
    fit_seed = seed + 2
    s_seed = seed + 3 if strategy_seed is None else strategy_seed

    c1 = fit_scorer(a_train, cfg.scorer, fit_seed)
    a1 = accept_lowest(c1.predict_proba(a_hold.features), cfg.mu)
    a1_ids, a1_labels = a_hold.ids[a1], a_hold.labels[a1]

    if isinstance(strategy, StrategySpec):
        augmented = apply_strategy(strategy, a_train, r_train, cfg.scorer, s_seed)
    else:
        augmented = strategy(a_train, r_train, s_seed)
    c2 = fit_scorer(augmented.dataset, cfg.scorer, fit_seed)

    pool = CreditDataset.concat([a_hold.without_labels(), r_hold]) if r_hold.n else a_hold.without_labels()
    a2 = accept_lowest(c2.predict_proba(pool.features), cfg.mu,
                       k=len(a1) if cfg.a2_size == "match" else None)
    a2_ids = pool.ids[a2]

    value = kickout_from_pools(a1_ids, a1_labels, a2_ids)
    kicked = ~np.isin(a1_ids, a2_ids)
    return KickoutResult(
        value=value,
        k_bad=int((kicked & (a1_labels == 1)).sum()),
        k_good=int((kicked & (a1_labels == 0)).sum()),
        s_bad=int((a1_labels == 1).sum()),
        a1_size=len(a1),
        a2_size=len(a2),
        rejects_in_a2=int((a2 >= a_hold.n).sum()),
    )
