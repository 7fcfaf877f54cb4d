"""Scorecard performance measures, the kickout formula and rank-based tests.

All score arguments are predicted probabilities of default (higher is
riskier) and labels use ``1 = Bad``, ``0 = Good``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


def _labels_scores(labels, scores):
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError(f"labels {y.shape} and scores {s.shape} must be equal-length vectors")
    return y, s


def auc(labels, scores) -> float:
    """Probability that a random Bad case gets a higher PD than a random Good one.

    Ties count one half. Computed from average ranks (Mann-Whitney U).
    """
    y, s = _labels_scores(labels, scores)
    n_bad = int((y == 1).sum())
    n_good = len(y) - n_bad
    if n_bad == 0 or n_good == 0:
        raise ValueError("AUC needs both classes")
    ranks = stats.rankdata(s)
    u = ranks[y == 1].sum() - n_bad * (n_bad + 1) / 2.0
    return float(u / (n_bad * n_good))


def brier(labels, probabilities) -> float:
    """Mean squared difference between PD and the 0/1 outcome."""
    y, p = _labels_scores(labels, probabilities)
    if len(y) == 0:
        raise ValueError("empty input")
    return float(np.mean((p - y) ** 2))


def r_precision(labels, scores, accept_fraction: float = 0.3) -> float:
    """Share of Good cases among the ``floor(accept_fraction * n)`` lowest-PD cases.

    Cases tied at the cutoff are taken in input order.
    """
    y, s = _labels_scores(labels, scores)
    k = math.floor(accept_fraction * len(y))
    if k < 1:
        raise ValueError(f"accept_fraction={accept_fraction} selects no cases out of {len(y)}")
    top = np.argsort(s, kind="stable")[:k]
    return float(np.mean(y[top] == 0))


@dataclass(frozen=True)
class KickoutInputs:
    """Counts from comparing the accepted pool before (A1) and after (A2) reject inference.

    k_bad, k_good : Bad / Good cases of A1 missing from A2.
    s_bad : Bad cases in A1.
    p_bad : share of Bad cases in A1.
    """

    k_bad: int
    k_good: int
    s_bad: int
    p_bad: float

    def __post_init__(self):
        if self.s_bad <= 0:
            raise ValueError("kickout is undefined when A1 holds no Bad cases")
        if not 0 < self.p_bad < 1:
            raise ValueError(f"p_bad must be in (0, 1), got {self.p_bad}")
        if not 0 <= self.k_bad <= self.s_bad:
            raise ValueError("k_bad must be between 0 and s_bad")
        n_good = self.s_bad / self.p_bad - self.s_bad
        if self.k_good < 0 or self.k_good > n_good + 1e-9:
            raise ValueError("k_good exceeds the Good cases in A1")


def kickout(inputs: KickoutInputs) -> float:
    """Kicked-out Bads rewarded, kicked-out Goods penalized, each weighted by
    the inverse class share and normalized by the Bads in A1. Range [-1, 1].
    """
    p = inputs.p_bad
    value = (inputs.k_bad / p - inputs.k_good / (1 - p)) / (inputs.s_bad / p)
    return min(1.0, max(-1.0, value))  # the invariants bound it; only rounding can step outside


def kickout_from_pools(a1_ids, a1_labels, a2_ids) -> float | None:
    """Kickout from the accepted pools; ``None`` when A1 contains no Bad case."""
    a1_ids = np.asarray(a1_ids).astype(str)
    a1_labels = np.asarray(a1_labels)
    s_bad = int((a1_labels == 1).sum())
    if s_bad == 0 or s_bad == len(a1_labels):
        return None
    kicked = ~np.isin(a1_ids, np.asarray(a2_ids).astype(str))
    return kickout(KickoutInputs(
        k_bad=int((kicked & (a1_labels == 1)).sum()),
        k_good=int((kicked & (a1_labels == 0)).sum()),
        s_bad=s_bad,
        p_bad=s_bad / len(a1_labels),
    ))


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    pvalue: float
    mean_ranks: np.ndarray  # one per strategy, rank 1 = best


def friedman_test(values, higher_is_better: bool = True) -> FriedmanResult:
    """Friedman rank-sum test for ``values`` of shape (k strategies, N blocks).

    Ranks are assigned within each block, averaging ties, and the statistic
    ``12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)`` is referred to a
    chi-square law with ``k - 1`` degrees of freedom.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("values must be a (k, N) matrix")
    k, n_blocks = v.shape
    if k < 3 or n_blocks < 2:
        raise ValueError(f"need k >= 3 strategies and N >= 2 blocks, got k={k}, N={n_blocks}")
    ranks = stats.rankdata(-v if higher_is_better else v, axis=0)
    mean_ranks = ranks.mean(axis=1)
    chi2 = 12.0 * n_blocks / (k * (k + 1)) * (np.sum(mean_ranks**2) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(float(chi2), 0.0)
    return FriedmanResult(chi2, float(stats.chi2.sf(chi2, k - 1)), mean_ranks)


# Studentized range quantiles divided by sqrt(2), alpha = 0.05 (Demsar, 2006).
NEMENYI_Q05 = {2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
               7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164}


def nemenyi_cd(k: int, n_blocks: int, alpha: float = 0.05) -> float:
    """Critical difference of mean ranks for the Nemenyi post-hoc test."""
    if alpha != 0.05:
        raise ValueError("only alpha = 0.05 is tabled")
    if k not in NEMENYI_Q05:
        raise ValueError(f"k={k} outside the tabled range 2..10")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    return NEMENYI_Q05[k] * math.sqrt(k * (k + 1) / (6.0 * n_blocks))


def spearman(a, b) -> float:
    """Pearson correlation of average ranks; NaN if either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    ra = stats.rankdata(a) - (len(a) + 1) / 2.0
    rb = stats.rankdata(b) - (len(b) + 1) / 2.0
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        return float("nan")
    return float(np.clip(ra @ rb / denom, -1.0, 1.0))
