"""Nonparametric tests for paired OCR measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata

EXACT_MAX_N = 12
ALPHA = 0.05


@dataclass(frozen=True)
class ComparisonResult:
    statistic: float
    p_value: float
    adjusted_p: float
    direction: str  # "better" | "worse" | "not-significant"
    n: int = 0


def bonferroni(p_values, m: int) -> list[float]:
    p_values = list(p_values)
    if m < len(p_values):
        raise ValueError(f"family size {m} is smaller than the number of tests {len(p_values)}")
    return [min(1.0, p * m) for p in p_values]


def pair_count(k: int) -> int:
    return k * (k - 1) // 2


def _signed_ranks(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if d.shape != np.asarray(y, dtype=float).shape or d.ndim != 1:
        raise ValueError("paired samples must be one-dimensional and of equal length")
    d = d[d != 0]
    return d, rankdata(np.abs(d))


def _exact_upper_tail(ranks, observed) -> float:
    """P(W+ >= observed) over all 2^n equally likely sign assignments.

    Ranks are halves at worst, so doubling them makes the count distribution
    an integer-indexed convolution.
    """
    twice = [int(round(2 * r)) for r in ranks]
    counts = np.zeros(sum(twice) + 1, dtype=object)
    counts[0] = 1
    for r in twice:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    target = int(round(2 * observed))
    return float(sum(counts[target:]) / 2 ** len(twice))


def _normal_tail(ranks, w_plus, alternative) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    if alternative == "greater":
        z = (w_plus - mean - 0.5) / math.sqrt(var)
        return 0.5 * math.erfc(z / math.sqrt(2))
    z = (w_plus - mean + 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(-z / math.sqrt(2))


def wilcoxon_signed_rank(x, y, alternative: str = "greater", m: int = 1,
                         alpha: float = ALPHA, method: str = "auto") -> ComparisonResult:
    """One-sided signed-rank test of ``x`` against paired ``y``.

    ``alternative="greater"`` asks whether ``x`` tends to exceed ``y``.  Zero
    differences are dropped; ties share average ranks.  The p-value is exact
    for up to 12 non-zero differences and uses the tie- and
    continuity-corrected normal approximation beyond that (``method`` forces
    either route).  ``m`` is the Bonferroni family size.
    """
    if alternative not in ("greater", "less"):
        raise ValueError(f"alternative must be 'greater' or 'less', got {alternative!r}")
    d, ranks = _signed_ranks(x, y)
    n = len(d)
    if n == 0:
        return ComparisonResult(0.0, 1.0, 1.0, "not-significant", 0)
    w_plus = float(ranks[d > 0].sum())
    exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if exact:
        if alternative == "greater":
            p = _exact_upper_tail(ranks, w_plus)
        else:
            # W- >= observed W- is the lower tail of W+
            p = _exact_upper_tail(ranks, float(ranks.sum()) - w_plus)
    else:
        p = _normal_tail(ranks, w_plus, alternative)
    p = min(1.0, max(0.0, p))
    adjusted = bonferroni([p], m)[0]
    direction = "not-significant"
    if adjusted < alpha:
        direction = "better" if alternative == "greater" else "worse"
    return ComparisonResult(w_plus, p, adjusted, direction, n)


def compare_pair(x, y, m: int, alpha: float = ALPHA) -> ComparisonResult:
    """Both one-sided tests of ``x`` vs ``y``; returns the significant one, if any."""
    up = wilcoxon_signed_rank(x, y, "greater", m, alpha)
    down = wilcoxon_signed_rank(x, y, "less", m, alpha)
    if up.direction != "not-significant":
        return up
    if down.direction != "not-significant":
        return down
    return up if up.p_value <= down.p_value else down


def friedman_test(matrix) -> tuple[float, float]:
    """Friedman chi-square over a documents x algorithms matrix, tie-corrected."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise ValueError("Friedman test needs at least 2 documents and 2 algorithms")
    n, k = a.shape
    ranks = np.apply_along_axis(rankdata, 1, a)
    mean_ranks = ranks.mean(axis=0)
    stat = 12.0 * n / (k * (k + 1)) * float(np.sum((mean_ranks - (k + 1) / 2.0) ** 2))
    ties = 0.0
    for row in a:
        _, t = np.unique(row, return_counts=True)
        ties += float(np.sum(t ** 3 - t))
    correction = 1.0 - ties / (n * (k ** 3 - k))
    if correction <= 0:
        return 0.0, 1.0
    stat /= correction
    return stat, float(chi2.sf(stat, k - 1))


def significance_marker(adjusted_p: float, direction: str) -> str:
    """``>``/``<`` repeated once, twice or thrice for P < 0.05, 0.01, 0.001."""
    if direction == "not-significant":
        return ""
    level = 3 if adjusted_p < 0.001 else 2 if adjusted_p < 0.01 else 1
    return (">" if direction == "better" else "<") * level


def star_marker(adjusted_p: float) -> str:
    """Footnote stars: '*' P<0.05, '**' P<0.01, none for P<0.001."""
    if adjusted_p < 0.001:
        return ""
    return "**" if adjusted_p < 0.01 else "*"
