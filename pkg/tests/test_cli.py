import csv
import json

import pytest

from ocrtune import corpus as C
from ocrtune.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def clean_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("clean")
    assert run("synth", "--out", out, "--count", 6, "--seed", 1, "--mix", "letter=0.5,other=0.5") == 0
    return out


@pytest.fixture(scope="module")
def noisy_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("noisy")
    assert run("synth", "--out", out, "--count", 6, "--seed", 2, "--noise-p", 0.15) == 0
    return out


def test_synth_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--out", tmp_path / name, "--count", 4, "--seed", 9, "--noise-p", 0.1) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_synth_usage_errors(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "x", "--count", 2) == 1
    assert "--seed" in capsys.readouterr().err
    assert run("synth", "--out", tmp_path / "x", "--seed", 1, "--mix", "poster=1") == 1
    assert run("synth", "--out", tmp_path / "x", "--seed", 1, "--mix", "letter") == 1
    assert run() == 1
    assert run("frobnicate") == 1


def test_split_theatre_covers(tmp_path):
    corpus = tmp_path / "c"
    assert run("synth", "--out", corpus, "--count", 60, "--seed", 3, "--mix", "theatre-play-cover=1") == 0
    for name in ("s1", "s2"):
        assert run("split", "--manifest", corpus / "manifest.tsv", "--seed", 5, "--out", tmp_path / name) == 0
    halves = [C.load_manifest(tmp_path / "s1" / f) for f in ("parameterization.tsv", "evaluation.tsv")]
    assert [len(h) for h in halves] == [30, 30]
    assert tree_bytes(tmp_path / "s1") == tree_bytes(tmp_path / "s2")


def test_split_empty_manifest(tmp_path):
    (tmp_path / "m.tsv").write_text("")
    assert run("split", "--manifest", tmp_path / "m.tsv", "--seed", 0, "--out", tmp_path / "o") == 1


def test_tune_modes_and_rerun(clean_corpus, tmp_path):
    args = ["tune", "--manifest", clean_corpus / "manifest.tsv", "--algorithm", "median_blur",
            "--seed", 0, "--population", 4, "--generations", 1]
    assert run(*args, "--mode", "per-typology", "--out", tmp_path / "t") == 0
    assert sorted(p.name for p in (tmp_path / "t").glob("*.params")) == [
        "median_blur.letter.params", "median_blur.other.params"]
    assert run(*args, "--out", tmp_path / "g") == 0
    assert [p.name for p in (tmp_path / "g").glob("*.params")] == ["median_blur.global.params"]
    assert run(*args, "--out", tmp_path / "g2") == 0
    assert tree_bytes(tmp_path / "g") == tree_bytes(tmp_path / "g2")


def test_apply_and_ocr(clean_corpus, tmp_path, capsys):
    doc = C.load_manifest(clean_corpus / "manifest.tsv")[0]
    assert run("apply", "--algorithm", "median_blur", "--set", "ksize=1",
               "--in", doc.image_path, "--out", tmp_path / "o.pgm") == 0
    assert (tmp_path / "o.pgm").read_bytes() == doc.image_path.read_bytes()
    capsys.readouterr()
    assert run("ocr", "--in", tmp_path / "o.pgm") == 0
    assert capsys.readouterr().out.rstrip("\n") == doc.ground_truth()
    assert run("apply", "--algorithm", "median_blur", "--set", "ksize=4",
               "--in", doc.image_path, "--out", tmp_path / "bad.pgm") == 1
    assert run("ocr", "--in", tmp_path / "missing.pgm") == 2


def test_missing_tesseract_binary(clean_corpus, monkeypatch):
    monkeypatch.delenv("OCRTUNE_TESSERACT", raising=False)
    doc = C.load_manifest(clean_corpus / "manifest.tsv")[0]
    assert run("ocr", "--engine", "tesseract", "--tesseract-bin", "/nonexistent/tess", "--in", doc.image_path) == 2


def test_evaluate_compare_errors(clean_corpus, tmp_path):
    recs = tmp_path / "r.csv"
    assert run("evaluate", "--manifest", clean_corpus / "manifest.tsv", "--scenario", "none", "--out", recs) == 0
    with open(recs, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and all(float(r["character_accuracy"]) == 100 for r in rows)

    assert run("compare", "--records", recs, "--out", tmp_path / "rep") == 0
    sig = (tmp_path / "rep" / "significance_character_accuracy.csv").read_text().splitlines()
    assert sig == ["algorithm,none", "none,"]
    assert (tmp_path / "rep" / "scenarios_character_accuracy.csv").read_text().count("\n") == 1

    assert run("errors", "--records", recs, "--out", tmp_path / "e.csv") == 0
    with open(tmp_path / "e.csv", newline="", encoding="utf-8") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 1 and table[0]["none"] == table[0]["total"] == "6"


def test_evaluate_with_tuned_params(noisy_corpus, tmp_path):
    params = tmp_path / "p"
    params.mkdir()
    (params / "median_blur.global.params").write_text("median_blur ksize=3\n")
    recs = tmp_path / "r.csv"
    assert run("evaluate", "--manifest", noisy_corpus / "manifest.tsv", "--algorithm", "median_blur",
               "--scenario", "none", "--scenario", "global", "--params-dir", params, "--out", recs) == 0
    with open(recs, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["scenario"] for r in rows} == {"none", "global"}
    assert run("evaluate", "--manifest", noisy_corpus / "manifest.tsv", "--algorithm", "median_blur",
               "--scenario", "typology", "--params-dir", params, "--out", recs) == 1


def test_config_file_precedence_and_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"count": 3, "seed": 4, "noise-p": 0.1}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "a") == 0
    assert len(C.load_manifest(tmp_path / "a" / "manifest.tsv")) == 3
    assert run("synth", "--config", cfg, "--count", 2, "--out", tmp_path / "b") == 0
    assert len(C.load_manifest(tmp_path / "b" / "manifest.tsv")) == 2
    cfg.write_text(json.dumps({"count": 3, "population": 8}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "c", "--seed", 1) == 1
    cfg.write_text("[1, 2]")
    assert run("synth", "--config", cfg, "--out", tmp_path / "c", "--seed", 1) == 1
