import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reject_inference.metrics import (
    KickoutInputs,
    auc,
    brier,
    friedman_test,
    kickout,
    kickout_from_pools,
    nemenyi_cd,
    r_precision,
    spearman,
)


def brute_auc(y, s):
    bad, good = s[y == 1], s[y == 0]
    wins = sum(1.0 if b > g else 0.5 if b == g else 0.0 for b, g in itertools.product(bad, good))
    return wins / (len(bad) * len(good))


def test_auc_examples():
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc([0, 1, 1, 0], [0.3] * 4) == 0.5
    assert auc([1, 0, 1, 0], [0.8, 0.7, 0.6, 0.2]) == pytest.approx(0.75)
    with pytest.raises(ValueError, match="both classes"):
        auc([1, 1], [0.1, 0.2])
    with pytest.raises(ValueError):
        auc([1, 0], [0.1])


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**31), st.booleans())
def test_auc_matches_brute_force(n, seed, coarse):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 5, n).astype(float) if coarse else rng.random(n)
    assert abs(auc(y, s) - brute_auc(y, s)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_auc_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    y = np.r_[0, 1, rng.integers(0, 2, 60)]
    s = rng.normal(size=62)
    assert auc(y, s) == pytest.approx(auc(y, np.exp(3 * s) + 1), abs=1e-12)


def test_brier_examples_and_decomposition():
    assert brier([1, 0], [1.0, 0.0]) == 0.0
    assert brier([1, 0, 1], [0.5] * 3) == 0.25
    assert brier([1, 0], [0.8, 0.3]) == pytest.approx(0.065)
    rng = np.random.default_rng(0)
    y1, p1 = rng.integers(0, 2, 30), rng.random(30)
    y2, p2 = rng.integers(0, 2, 70), rng.random(70)
    whole = brier(np.r_[y1, y2], np.r_[p1, p2])
    assert whole == pytest.approx((30 * brier(y1, p1) + 70 * brier(y2, p2)) / 100, abs=1e-15)


def test_r_precision():
    assert r_precision([0] * 10, np.arange(10)) == 1.0
    y = np.array([0, 1, 0, 1, 1, 0, 1, 0, 1, 1])
    s = np.arange(10) / 10
    assert r_precision(y, s) == pytest.approx(2 / 3)
    # tie at the cutoff: input order decides
    assert r_precision([1, 0, 0], [0.5, 0.5, 0.9], accept_fraction=0.34) == 0.0
    with pytest.raises(ValueError, match="selects no cases"):
        r_precision([0, 1], [0.1, 0.2], accept_fraction=0.3)


def test_kickout_examples():
    assert kickout(KickoutInputs(0, 0, 10, 0.2)) == 0.0
    assert kickout(KickoutInputs(10, 0, 10, 0.2)) == 1.0
    assert kickout(KickoutInputs(2, 3, 10, 0.2)) == pytest.approx(0.125)
    assert kickout(KickoutInputs(0, 40, 10, 0.2)) == pytest.approx(-1.0)


def test_kickout_validation():
    with pytest.raises(ValueError, match="no Bad"):
        KickoutInputs(0, 0, 0, 0.2)
    with pytest.raises(ValueError):
        KickoutInputs(0, 0, 5, 1.0)
    with pytest.raises(ValueError):
        KickoutInputs(6, 0, 5, 0.5)
    with pytest.raises(ValueError):
        KickoutInputs(0, 6, 5, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.data())
def test_kickout_sign_flip_at_even_split(s_bad, data):
    kb = data.draw(st.integers(0, s_bad))
    kg = data.draw(st.integers(0, s_bad))
    a = kickout(KickoutInputs(kb, kg, s_bad, 0.5))
    b = kickout(KickoutInputs(kg, kb, s_bad, 0.5))
    assert a == pytest.approx(-b, abs=1e-12)
    assert -1 - 1e-12 <= a <= 1 + 1e-12


def test_kickout_from_pools():
    a1 = ["a", "b", "c", "d", "e"]
    labels = [1, 0, 0, 1, 0]
    assert kickout_from_pools(a1, labels, a1) == 0.0
    # "a" (Bad) and "b" (Good) kicked out; newcomers never count
    v = kickout_from_pools(a1, labels, ["c", "d", "e", "r1", "r2"])
    p = 0.4
    assert v == pytest.approx((1 / p - 1 / (1 - p)) / (2 / p))
    assert kickout_from_pools(a1, [0] * 5, ["x"]) is None


def test_friedman():
    assert friedman_test(np.ones((4, 6))).statistic == 0.0
    res = friedman_test(np.array([[3, 3], [2, 2], [1, 1]]), higher_is_better=True)
    assert res.statistic == pytest.approx(4.0)
    np.testing.assert_allclose(res.mean_ranks, [1, 2, 3])
    rng = np.random.default_rng(0)
    v = rng.random((5, 12))
    perm = rng.permutation(5)
    assert friedman_test(v[perm]).statistic == pytest.approx(friedman_test(v).statistic)
    ref = stats.friedmanchisquare(*v)
    assert friedman_test(v).statistic == pytest.approx(ref.statistic)
    assert friedman_test(v).pvalue == pytest.approx(ref.pvalue)
    with pytest.raises(ValueError):
        friedman_test(np.ones((2, 5)))


def test_nemenyi():
    assert nemenyi_cd(2, 4) == pytest.approx(1.960 * np.sqrt(1 / 4))
    assert nemenyi_cd(5, 10) == nemenyi_cd(5, 10)
    cds = [nemenyi_cd(10, n) for n in (10, 10**4, 10**8)]
    assert cds[0] > cds[1] > cds[2] and cds[2] < 2e-3
    with pytest.raises(ValueError):
        nemenyi_cd(11, 5)
    with pytest.raises(ValueError):
        nemenyi_cd(1, 5)


def test_spearman():
    a = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    assert spearman(a, a) == pytest.approx(1.0)
    assert spearman(a, -a) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
    assert np.isnan(spearman([1, 1, 1], [1, 2, 3]))
    rng = np.random.default_rng(2)
    x, y = rng.integers(0, 4, 30), rng.normal(size=30)
    assert spearman(x, y) == pytest.approx(stats.spearmanr(x, y).statistic)


def test_kickout_extremes_are_exact():
    for size in range(2, 300):
        for s_bad in range(1, size):
            p = s_bad / size
            assert kickout(KickoutInputs(0, size - s_bad, s_bad, p)) >= -1.0
            assert kickout(KickoutInputs(s_bad, 0, s_bad, p)) == 1.0
