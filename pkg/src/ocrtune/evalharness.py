"""Scenario evaluation, statistical comparison and error analysis reports.

Record CSV columns (one row per scenario, operator and document, in that
order of sorting)::

    scenario, operator, doc_id, typology, character_accuracy, f1, precision,
    recall, cer, wer, index_bow, bow_count_matches, distance, insertions,
    deletions, substitutions, error_category, error

Scenarios are ``none`` (no pre-processing, operator ``none``), ``default``,
``global`` and ``typology``.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import params as P
from .imaging import InvalidParameter, apply_operator
from .metrics import ERROR_CATEGORIES, evaluate_text
from .ocr import EngineFailure
from .stats import compare_pair, friedman_test, significance_marker, star_marker

log = logging.getLogger(__name__)

SCENARIOS = ("none", "default", "global", "typology")

RECORD_FIELDS = (
    "scenario", "operator", "doc_id", "typology", "character_accuracy", "f1", "precision",
    "recall", "cer", "wer", "index_bow", "bow_count_matches", "distance", "insertions",
    "deletions", "substitutions", "error_category", "error",
)
_INT_FIELDS = {"bow_count_matches", "distance", "insertions", "deletions", "substitutions"}
_FLOAT_FIELDS = {"character_accuracy", "f1", "precision", "recall", "cer", "wer", "index_bow"}


class ScenarioError(ValueError):
    pass


def resolve_assignment(scenario: str, operator: str, typology: str, tuned) -> P.ParamAssignment | None:
    """Parameters to use for one document; ``tuned`` maps (operator, scope) to assignments."""
    if scenario == "none":
        return None
    if scenario == "default":
        return P.defaults(operator)
    scope = "global" if scenario == "global" else typology
    if scenario not in ("global", "typology"):
        raise ScenarioError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    try:
        return tuned[(operator, scope)]
    except KeyError:
        raise ScenarioError(f"no tuned parameters for {operator!r} with scope {scope!r}") from None


def _one_record(sample, scenario, operator, assignment, engine) -> dict:
    error = ""
    raster = sample.raster
    try:
        if assignment is not None:
            raster = apply_operator(operator, raster, assignment.as_dict())
        text = engine.recognize(raster)
    except (EngineFailure, InvalidParameter) as exc:
        log.warning("%s/%s/%s failed: %s", scenario, operator, sample.id, exc)
        error, text = str(exc) or type(exc).__name__, ""
    rec = evaluate_text(sample.text, text).as_dict()
    rec.update(scenario=scenario, operator=operator if assignment is not None else "none",
               doc_id=sample.id, typology=sample.doc.typology, error=error)
    return rec


def evaluate_scenario(samples, scenario: str, operator: str, engine, tuned=None,
                      workers: int = 1) -> list[dict]:
    """One metric record per document for ``operator`` under ``scenario``."""
    tuned = tuned or {}
    jobs = [(s, resolve_assignment(scenario, operator, s.doc.typology, tuned)) for s in samples]
    run = lambda job: _one_record(job[0], scenario, operator, job[1], engine)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]


def sort_records(records) -> list[dict]:
    order = {s: i for i, s in enumerate(SCENARIOS)}
    return sorted(records, key=lambda r: (order.get(r["scenario"], len(order)), r["scenario"],
                                          r["operator"], r["doc_id"]))


def write_records(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in sort_records(records):
            w.writerow({k: _fmt(r.get(k, "")) for k in RECORD_FIELDS})


def read_records(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in _INT_FIELDS:
            r[k] = int(r[k])
        for k in _FLOAT_FIELDS:
            r[k] = float(r[k])
    return rows


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return v


# --------------------------------------------------------------------------
# statistics over records

def mean_table(records) -> list[dict]:
    groups = defaultdict(list)
    for r in sort_records(records):
        groups[(r["scenario"], r["operator"])].append(r)
    return [{
        "scenario": s, "operator": o, "n": len(rs),
        "mean_character_accuracy": float(np.mean([r["character_accuracy"] for r in rs])),
        "mean_f1": float(np.mean([r["f1"] for r in rs])),
    } for (s, o), rs in groups.items()]


def paired_values(records, metric, scenario, operators) -> tuple[list[str], dict[str, list[float]]]:
    """Per-operator metric vectors over the documents every operator covers.

    ``none`` is read from the ``none`` scenario; other operators from ``scenario``.
    """
    table = defaultdict(dict)
    for r in records:
        if r["operator"] == "none" and r["scenario"] == "none":
            table["none"][r["doc_id"]] = r[metric]
        elif r["scenario"] == scenario:
            table[r["operator"]][r["doc_id"]] = r[metric]
    operators = [o for o in operators if table.get(o)]
    if not operators:
        return [], {}
    docs = sorted(set.intersection(*(set(table[o]) for o in operators)))
    return docs, {o: [table[o][d] for d in docs] for o in operators}


def algorithm_comparison(records, metric, scenario, operators) -> dict:
    """Friedman test plus all pairwise one-sided Wilcoxon tests between algorithms.

    The Bonferroni family is every one-sided test in the table: ``k (k - 1)``.
    """
    docs, values = paired_values(records, metric, scenario, operators)
    names = list(values)
    k = len(names)
    m = max(1, k * (k - 1))
    pairs = {}
    for a in names:
        for b in names:
            if a != b:
                pairs[(a, b)] = compare_pair(values[a], values[b], m)
    friedman = friedman_test(np.column_stack([values[o] for o in names])) \
        if k >= 2 and len(docs) >= 2 else (math.nan, math.nan)
    return {"names": names, "docs": docs, "values": values, "pairs": pairs,
            "friedman": friedman, "m": m}


def scenario_comparison(records, metric, operators, scenarios=("default", "global", "typology")) -> dict:
    """Pairwise scenario comparisons per operator; family = all one-sided tests in the table."""
    by = defaultdict(dict)
    for r in records:
        by[(r["operator"], r["scenario"])][r["doc_id"]] = r[metric]
    cells = []
    for op in operators:
        present = [s for s in scenarios if by.get((op, s))]
        for i, a in enumerate(present):
            for b in present[i + 1:]:
                docs = sorted(set(by[(op, a)]) & set(by[(op, b)]))
                cells.append((op, a, b, [by[(op, a)][d] for d in docs], [by[(op, b)][d] for d in docs]))
    m = max(1, 2 * len(cells))
    return {"m": m, "results": [(op, a, b, compare_pair(x, y, m)) for op, a, b, x, y in cells]}


def error_frequency_table(records) -> list[dict]:
    """Counts of each edit-operation category per (scenario, operator), fixed category order."""
    counts = defaultdict(Counter)
    for r in records:
        counts[(r["scenario"], r["operator"])][r["error_category"]] += 1
    order = {s: i for i, s in enumerate(SCENARIOS)}
    rows = []
    for scenario, op in sorted(counts, key=lambda k: (order.get(k[0], len(order)), k[0], k[1])):
        c = counts[(scenario, op)]
        rows.append({"scenario": scenario, "operator": op, **{k: c[k] for k in ERROR_CATEGORIES},
                     "total": sum(c.values())})
    return rows


# --------------------------------------------------------------------------
# report files

def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_error_table(path, table) -> None:
    _write_csv(path, ["scenario", "operator", *ERROR_CATEGORIES, "total"],
               [[r["scenario"], r["operator"], *(r[c] for c in ERROR_CATEGORIES), r["total"]]
                for r in table])


def _pick_scenario(records):
    present = {r["scenario"] for r in records}
    for s in ("typology", "global", "default"):
        if s in present:
            return s
    return "none"


def render_reports(records, out_dir, scenario=None, metrics=("character_accuracy", "f1")) -> list[Path]:
    """Write mean, significance, summary, scenario-comparison and error CSVs.

    Returns the written paths.  Significance cells use ``>``/``<`` repeated by
    tier (P < 0.05 / 0.01 / 0.001, Bonferroni-adjusted) for row better/worse
    than column.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = list(records)
    written = []

    means = mean_table(records)
    path = out_dir / "means.csv"
    _write_csv(path, ["scenario", "operator", "n", "mean_character_accuracy", "mean_f1"],
               [[r["scenario"], r["operator"], r["n"], f"{r['mean_character_accuracy']:.4f}",
                 f"{r['mean_f1']:.4f}"] for r in means])
    written.append(path)

    scenario = scenario or _pick_scenario(records)
    operators = ["none"] + sorted({r["operator"] for r in records if r["scenario"] == scenario} - {"none"})
    for metric in metrics:
        cmp = algorithm_comparison(records, metric, scenario, operators)
        names, pairs = cmp["names"], cmp["pairs"]
        path = out_dir / f"significance_{metric}.csv"
        rows = [[a] + ["" if a == b else significance_marker(pairs[(a, b)].adjusted_p, pairs[(a, b)].direction)
                       for b in names] for a in names]
        _write_csv(path, ["algorithm"] + names, rows)
        written.append(path)

        path = out_dir / f"summary_{metric}.csv"
        rows = []
        for a in names:
            worse = [P.ABBREVIATIONS.get(b, b) + star_marker(pairs[(a, b)].adjusted_p)
                     for b in names if b != a and pairs[(a, b)].direction == "better"]
            rows.append([a, P.ABBREVIATIONS.get(a, a), f"{np.mean(cmp['values'][a]):.4f}",
                         " ".join(worse), len(worse)])
        chi, p = cmp["friedman"]
        rows.append(["chi_square", "", "" if math.isnan(chi) else f"{chi:.6g}", "", ""])
        rows.append(["p_value", "", "" if math.isnan(p) else f"{p:.6g}", "", ""])
        rows.append(["family_size", "", cmp["m"], "", ""])
        _write_csv(path, ["algorithm", "abbrev", "mean", "significantly_worse", "count"], rows)
        written.append(path)

        sc = scenario_comparison(records, metric, sorted(set(operators) - {"none"}))
        path = out_dir / f"scenarios_{metric}.csv"
        rows = []
        for op, a, b, res in sc["results"]:
            # "a vs b" reads '<' when a is significantly worse than b
            marker = significance_marker(res.adjusted_p, res.direction)
            rows.append([op, f"{a} vs {b}", marker or f"{res.adjusted_p:.2g}", f"{res.p_value:.6g}",
                         f"{res.adjusted_p:.6g}", sc["m"]])
        _write_csv(path, ["operator", "comparison", "cell", "p_value", "adjusted_p", "family_size"], rows)
        written.append(path)

    path = out_dir / "errors.csv"
    table = error_frequency_table(records)
    write_error_table(path, table)
    written.append(path)
    return written
