"""Isolation-forest filtering of rejects ahead of labeling.

A forest fitted on the accepts scores every reject's similarity to them.
Rejects in the lowest ``beta_bottom`` percent (least like the accepts) and
the highest ``beta_top`` percent (so like the accepts that labeling them
adds little) are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CreditDataset
from .learners.iforest import fit_isolation_forest, similarity_score


@dataclass(frozen=True)
class FilterConfig:
    beta_bottom: float = 0.0
    beta_top: float = 0.0
    n_trees: int = 100
    subsample_size: int | None = None

    def __post_init__(self):
        for name in ("beta_bottom", "beta_top"):
            v = getattr(self, name)
            if not 0 <= v < 100:
                raise ValueError(f"{name} must be in [0, 100), got {v}")
        if self.beta_bottom + self.beta_top >= 100:
            raise ValueError("beta_bottom + beta_top must be < 100")

    @classmethod
    def from_total(cls, percent: float, **kw) -> FilterConfig:
        """Split a total filtered percentage evenly between both tails."""
        return cls(beta_bottom=percent / 2, beta_top=percent / 2, **kw)

    @property
    def active(self) -> bool:
        return self.beta_bottom > 0 or self.beta_top > 0


@dataclass(frozen=True, eq=False)
class FilterResult:
    retained: CreditDataset
    removed_ids: np.ndarray
    similarity: np.ndarray  # aligned with the input rejects


def _tail_count(percent: float, m: int) -> int:
    if percent <= 0:
        return 0
    return min(m, math.ceil(percent * m / 100 - 1e-9))


def percentile_band_mask(scores, beta_bottom: float, beta_top: float) -> np.ndarray:
    """Boolean mask of scores falling in either removal tail.

    Each tail boundary is a nearest-rank order statistic: the
    ``ceil(beta * m / 100)``-th value from that end. Scores tied with a
    boundary are removed with it.
    """
    scores = np.asarray(scores, dtype=float)
    m = len(scores)
    remove = np.zeros(m, dtype=bool)
    if m == 0:
        return remove
    s = np.sort(scores)
    k_b = _tail_count(beta_bottom, m)
    k_t = _tail_count(beta_top, m)
    if k_b:
        remove |= scores <= s[k_b - 1]
    if k_t:
        remove |= scores >= s[m - k_t]
    return remove


def filter_rejects(accepts: CreditDataset, rejects: CreditDataset, cfg: FilterConfig,
                   seed: int) -> FilterResult:
    if accepts.n == 0 or rejects.n == 0:
        raise ValueError("accepts and rejects must be non-empty")
    if not cfg.active:
        return FilterResult(rejects, np.array([], dtype=str), np.full(rejects.n, np.nan))
    forest = fit_isolation_forest(accepts.features, n_trees=cfg.n_trees,
                                  subsample_size=cfg.subsample_size, seed=seed)
    sim = similarity_score(forest, rejects.features)
    remove = percentile_band_mask(sim, cfg.beta_bottom, cfg.beta_top)
    if remove.all():
        raise ValueError("filter configuration removes every reject")
    return FilterResult(rejects.subset(~remove), rejects.ids[remove], sim)
