import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reject_inference.data import CreditDataset
from reject_inference.filtering import FilterConfig, filter_rejects, percentile_band_mask


def pools(n_acc=300, n_rej=100, seed=0):
    rng = np.random.default_rng(seed)
    acc = CreditDataset([f"a{i}" for i in range(n_acc)], rng.normal(size=(n_acc, 3)),
                        rng.integers(0, 2, n_acc))
    rej = CreditDataset([f"r{i}" for i in range(n_rej)], rng.normal(loc=0.7, size=(n_rej, 3)))
    return acc, rej


def test_no_filtering_keeps_everything():
    acc, rej = pools()
    res = filter_rejects(acc, rej, FilterConfig(), seed=0)
    assert res.retained.n == rej.n and len(res.removed_ids) == 0


def test_two_percent_each_tail_keeps_96_of_100():
    scores = np.random.default_rng(1).permutation(100) / 100.0
    mask = percentile_band_mask(scores, 2, 2)
    assert (~mask).sum() == 96
    # the two lowest and the two highest go
    assert set(np.flatnonzero(mask)) == set(np.argsort(scores)[[0, 1, 98, 99]])
    acc, rej = pools()
    res = filter_rejects(acc, rej, FilterConfig(beta_bottom=2, beta_top=2), seed=3)
    assert res.retained.n == 96


def test_total_percentage_splits_evenly():
    cfg = FilterConfig.from_total(2)
    assert cfg.beta_bottom == cfg.beta_top == 1
    acc, rej = pools()
    assert filter_rejects(acc, rej, cfg, seed=0).retained.n == 98
    assert not FilterConfig.from_total(0).active


def test_ties_at_boundary_are_all_removed():
    scores = np.array([0.1, 0.1, 0.1, 0.5, 0.6, 0.7])
    mask = percentile_band_mask(scores, 10, 0)
    assert mask.tolist() == [True, True, True, False, False, False]


def test_partition_and_determinism():
    acc, rej = pools(seed=4)
    cfg = FilterConfig(beta_bottom=5, beta_top=3)
    a = filter_rejects(acc, rej, cfg, seed=9)
    b = filter_rejects(acc, rej, cfg, seed=9)
    kept = set(a.retained.ids)
    removed = set(a.removed_ids)
    assert kept.isdisjoint(removed) and kept | removed == set(rej.ids)
    assert list(a.retained.ids) == list(b.retained.ids)
    np.testing.assert_array_equal(a.similarity, b.similarity)


def test_errors():
    acc, rej = pools()
    with pytest.raises(ValueError):
        FilterConfig(beta_bottom=60, beta_top=40)
    with pytest.raises(ValueError):
        FilterConfig(beta_top=-1)
    with pytest.raises(ValueError, match="non-empty"):
        filter_rejects(acc, rej.subset(np.zeros(rej.n, dtype=bool)), FilterConfig(1, 1), 0)
    one = rej.subset([0])
    with pytest.raises(ValueError, match="every reject"):
        filter_rejects(acc, one, FilterConfig(beta_top=1), 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=300),
       st.floats(0, 40), st.floats(0, 40), st.floats(0, 19))
def test_raising_beta_top_never_keeps_more(scores, bb, bt, extra):
    lo = (~percentile_band_mask(scores, bb, bt)).sum()
    hi = (~percentile_band_mask(scores, bb, bt + extra)).sum()
    assert hi <= lo
