"""OCR quality measures computed against a ground-truth transcription.

Texts are NFC-normalised before comparison so that a precomposed letter and
its decomposed form count as one character.  Words are maximal runs of
non-whitespace; matching is case-sensitive and keeps punctuation.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, asdict


class UndefinedMetric(ValueError):
    """The ground truth is empty, so a rate normalised by its length is undefined."""


ERROR_CATEGORIES = ("none", "del", "ins", "sub", "del+ins", "del+sub", "ins+sub", "del+ins+sub")


@dataclass(frozen=True)
class EditScript:
    insertions: int
    deletions: int
    substitutions: int
    distance: int


@dataclass(frozen=True)
class MetricRecord:
    cer: float
    character_accuracy: float
    wer: float
    bow_count_matches: int
    index_bow: float
    precision: float
    recall: float
    f1: float
    distance: int
    insertions: int
    deletions: int
    substitutions: int
    error_category: str

    def as_dict(self):
        return asdict(self)


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def tokenize(text: str) -> list[str]:
    return normalize(text).split()


def _edit_matrix(a, b):
    n, m = len(a), len(b)
    prev = list(range(m + 1))
    rows = [prev]
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != b[j - 1]))
        rows.append(cur)
        prev = cur
    return rows


def edit_script(a, b) -> EditScript:
    """Levenshtein alignment of sequence ``a`` (reference) to ``b`` (hypothesis).

    A deletion is a reference element missing from ``b``; an insertion is a
    spurious element of ``b``.  The backtrace prefers the diagonal, then
    deletion, then insertion, so the counts are deterministic.
    """
    d = _edit_matrix(a, b)
    i, j = len(a), len(b)
    ins = dels = subs = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            subs += a[i - 1] != b[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditScript(ins, dels, subs, d[len(a)][len(b)])


def edit_distance(a, b) -> int:
    """Levenshtein distance between two sequences, in O(min(n, m)) memory."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ai in enumerate(a, 1):
        cur = [i]
        for j, bj in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != bj)))
        prev = cur
    return prev[-1]


def levenshtein(a: str, b: str) -> EditScript:
    return edit_script(normalize(a), normalize(b))


def cer(gt: str, out: str) -> float:
    gt, out = normalize(gt), normalize(out)
    if not gt:
        raise UndefinedMetric("character error rate is undefined for an empty ground truth")
    return edit_distance(gt, out) / len(gt)


def character_accuracy(gt: str, out: str) -> float:
    return (1.0 - cer(gt, out)) * 100.0


def wer(gt: str, out: str) -> float:
    ref = tokenize(gt)
    if not ref:
        raise UndefinedMetric("word error rate is undefined for an empty ground truth")
    return edit_distance(ref, tokenize(out)) / len(ref)


def bow_count_matches(gt: str, out: str) -> int:
    """Number of distinct ground-truth words whose occurrence counts agree."""
    n_gt, n_out = Counter(tokenize(gt)), Counter(tokenize(out))
    return sum(1 for w, n in n_gt.items() if n_out[w] == n)


def index_bow(gt: str, out: str) -> float:
    """Share of distinct ground-truth words recognised at least once."""
    ref = set(tokenize(gt))
    if not ref:
        raise UndefinedMetric("bag-of-words index is undefined for an empty ground truth")
    hyp = set(tokenize(out))
    return len(ref & hyp) / len(ref)


def precision_recall_f1(gt: str, out: str) -> tuple[float, float, float]:
    matches = bow_count_matches(gt, out)
    n_out, n_gt = len(tokenize(out)), len(tokenize(gt))
    precision = matches / n_out if n_out else 0.0
    recall = matches / n_gt if n_gt else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def category_of(script: EditScript) -> str:
    kinds = [name for name, n in (("del", script.deletions), ("ins", script.insertions),
                                  ("sub", script.substitutions)) if n > 0]
    return "+".join(kinds) if kinds else "none"


def classify_errors(gt: str, out: str) -> str:
    return category_of(levenshtein(gt, out))


def evaluate_text(gt: str, out: str) -> MetricRecord:
    """All measures for one (ground truth, OCR output) pair."""
    gt, out = normalize(gt), normalize(out)
    if not gt:
        raise UndefinedMetric("metrics are undefined for an empty ground truth")
    script = edit_script(gt, out)
    rate = script.distance / len(gt)
    p, r, f = precision_recall_f1(gt, out)
    return MetricRecord(
        cer=rate,
        character_accuracy=(1.0 - rate) * 100.0,
        wer=wer(gt, out) if tokenize(gt) else float("nan"),
        bow_count_matches=bow_count_matches(gt, out),
        index_bow=index_bow(gt, out) if tokenize(gt) else 0.0,
        precision=p,
        recall=r,
        f1=f,
        distance=script.distance,
        insertions=script.insertions,
        deletions=script.deletions,
        substitutions=script.substitutions,
        error_category=category_of(script),
    )
