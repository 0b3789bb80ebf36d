import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

import oracles
from ocrtune import stats as S

# paired samples of size <= 10, some with tied magnitudes and zero differences
FIXTURES = [
    ([1, 2, 3, 4, 5, 6], [0] * 6),
    ([5.1, 4.8, 6.0, 7.2, 5.5, 6.1, 4.9, 5.0], [4.9, 5.0, 5.2, 6.8, 5.6, 5.0, 4.1, 5.0]),
    ([3, 1, 4, 1, 5, 9, 2, 6, 5, 3], [2, 7, 1, 8, 2, 8, 1, 8, 2, 8]),
    ([10, 12, 11, 15, 14, 13, 12], [11, 10, 11, 12, 12, 11, 14]),
    ([1, 1, 2, 2, 3], [0, 0, 0, 0, 0]),
    ([0.5, -0.5, 1.5, -1.5, 2.0], [0, 0, 0, 0, 0]),
]


def test_all_zero_differences():
    r = S.wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
    assert (r.p_value, r.direction) == (1.0, "not-significant")


def test_extreme_six():
    r = S.wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], [0] * 6, "greater")
    assert r.p_value == 1 / 64 and r.statistic == 21


@pytest.mark.parametrize("x,y", FIXTURES)
def test_exact_matches_enumeration(x, y):
    d = [a - b for a, b in zip(x, y)]
    up = S.wilcoxon_signed_rank(x, y, "greater", method="exact")
    down = S.wilcoxon_signed_rank(x, y, "less", method="exact")
    assert Fraction(up.p_value).limit_denominator(2 ** 12) == oracles.wilcoxon_enumerate(d)
    assert Fraction(down.p_value).limit_denominator(2 ** 12) == oracles.wilcoxon_enumerate([-v for v in d])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=1, max_size=10))
def test_exact_matches_enumeration_random(d):
    r = S.wilcoxon_signed_rank(d, [0] * len(d), "greater")
    if all(v == 0 for v in d):
        assert r.p_value == 1
    else:
        assert r.p_value == float(oracles.wilcoxon_enumerate(d))


def test_exact_agrees_with_scipy_without_ties():
    rng = np.random.default_rng(0)
    x = rng.normal(size=10)
    y = rng.normal(size=10)
    ours = S.wilcoxon_signed_rank(x, y, "greater").p_value
    assert ours == pytest.approx(sps.wilcoxon(x, y, alternative="greater", method="exact").pvalue)


def test_normal_path_close_to_exact_at_twelve():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y = rng.normal(size=12), rng.normal(size=12)
        a = S.wilcoxon_signed_rank(x, y, method="exact").p_value
        b = S.wilcoxon_signed_rank(x, y, method="normal").p_value
        assert abs(a - b) < 0.02


def test_normal_path_matches_formula():
    d = np.array([1, -2, 3, 4, 4, -5, 6, 7, 8, 9, -10, 11, 12, 13, 13])
    r = S.wilcoxon_signed_rank(d, np.zeros_like(d), "greater")
    ranks = sps.rankdata(np.abs(d))
    w = ranks[d > 0].sum()
    n = len(d)
    var = n * (n + 1) * (2 * n + 1) / 24 - (2 ** 3 - 2) * 2 / 48
    z = (w - n * (n + 1) / 4 - 0.5) / math.sqrt(var)
    assert r.p_value == pytest.approx(sps.norm.sf(z), rel=1e-12)


def test_direction_and_bonferroni_applied():
    x = [1, 2, 3, 4, 5, 6]
    r = S.wilcoxon_signed_rank(x, [0] * 6, "greater", m=2)
    assert r.adjusted_p == 2 / 64 and r.direction == "better"
    r = S.wilcoxon_signed_rank(x, [0] * 6, "greater", m=4)
    assert r.adjusted_p == 4 / 64 and r.direction == "not-significant"
    r = S.wilcoxon_signed_rank([0] * 6, x, "less")
    assert r.direction == "worse"
    with pytest.raises(ValueError):
        S.wilcoxon_signed_rank(x, x, "two-sided")


def test_compare_pair_picks_significant_side():
    x = [1, 2, 3, 4, 5, 6]
    assert S.compare_pair(x, [0] * 6, 1).direction == "better"
    assert S.compare_pair([0] * 6, x, 1).direction == "worse"
    assert S.compare_pair([0, 1, 0, 1], [1, 0, 1, 0], 1).direction == "not-significant"


def test_bonferroni():
    assert S.bonferroni([0.01], 10) == [pytest.approx(0.1)]
    assert S.bonferroni([0.5], 3) == [1.0]
    assert S.bonferroni([0.2, 0.3], 2) == [0.4, 0.6]
    with pytest.raises(ValueError):
        S.bonferroni([0.1, 0.2, 0.3], 2)
    assert S.pair_count(16) == 120


def friedman_by_hand(m):
    """Rank each row, then apply the tie-corrected chi-square formula."""
    m = np.asarray(m, float)
    n, k = m.shape
    ranks = np.array([sps.rankdata(row) for row in m])
    rbar = ranks.mean(axis=0)
    chi = 12 * n / (k * (k + 1)) * sum((r - (k + 1) / 2) ** 2 for r in rbar)
    ties = sum(sum(t ** 3 - t for t in np.unique(row, return_counts=True)[1]) for row in m)
    return chi / (1 - ties / (n * (k ** 3 - k)))


FRIEDMAN_FIXTURES = [
    [[9, 5, 1], [8, 6, 2], [7, 4, 3], [9, 7, 1]],
    [[1, 2, 3, 4], [2, 1, 4, 3], [1, 3, 2, 4], [4, 3, 2, 1], [1, 2, 4, 3]],
    [[1, 1, 2], [3, 2, 2], [1, 2, 3], [5, 5, 5], [2, 1, 1]],
]


@pytest.mark.parametrize("m", FRIEDMAN_FIXTURES)
def test_friedman_matches_hand_formula(m):
    chi, p = S.friedman_test(m)
    assert chi == pytest.approx(friedman_by_hand(m), rel=1e-12)
    assert p == pytest.approx(sps.chi2.sf(chi, len(m[0]) - 1))
    assert chi == pytest.approx(sps.friedmanchisquare(*np.asarray(m, float).T).statistic)


def test_friedman_first_fixture_exact_value():
    # algorithm A always ranked 3 of 3: mean ranks (3, 2, 1) over 4 documents -> chi2 = 8
    chi, _ = S.friedman_test(FRIEDMAN_FIXTURES[0])
    assert chi == pytest.approx(8.0)


def test_friedman_degenerate_and_invariances():
    assert S.friedman_test([[1, 1], [2, 2], [3, 3]]) == (0.0, 1.0)
    m = np.asarray(FRIEDMAN_FIXTURES[1], float)
    base = S.friedman_test(m)[0]
    assert S.friedman_test(m[:, ::-1])[0] == pytest.approx(base)
    assert S.friedman_test(m ** 3)[0] == pytest.approx(base)
    with pytest.raises(ValueError):
        S.friedman_test([[1, 2]])


def test_markers():
    assert S.significance_marker(0.04, "better") == ">"
    assert S.significance_marker(0.004, "better") == ">>"
    assert S.significance_marker(0.0004, "worse") == "<<<"
    assert S.significance_marker(0.5, "not-significant") == ""
    assert [S.star_marker(p) for p in (0.04, 0.004, 0.0004)] == ["*", "**", ""]
