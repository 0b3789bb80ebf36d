"""Document manifests, stratified sampling, and synthetic corpora."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .ocr import NoiseProfile, render_synthetic
from .raster import read_pgm, write_pgm

log = logging.getLogger(__name__)

TYPOLOGIES = ("letter", "process-cover", "structured-report", "theatre-play-cover",
              "non-structured-report", "other")

SAMPLE_FRACTION = 0.05
MIN_PER_TYPOLOGY = 60


class ManifestError(ValueError):
    """Manifest problems; ``problems`` lists every offending line."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Document:
    id: str
    image_path: Path
    transcription_path: Path
    typology: str
    series_code: str

    def ground_truth(self) -> str:
        return self.transcription_path.read_text(encoding="utf-8").strip()


@dataclass(frozen=True)
class SplitResult:
    parameterization: list
    evaluation: list


def load_manifest(path, check_files=True) -> list[Document]:
    """Parse a tab-separated manifest: id, image, transcription, typology, series.

    Relative paths resolve against the manifest's directory.  Blank lines and
    lines starting with ``#`` are skipped.
    """
    path = Path(path)
    base = path.parent
    docs, problems, seen = [], [], set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 5:
            problems.append(f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
            continue
        doc_id, image, text, typology, series = (f.strip() for f in fields)
        if doc_id in seen:
            problems.append(f"line {lineno}: duplicate id {doc_id!r}")
        seen.add(doc_id)
        if typology not in TYPOLOGIES:
            problems.append(
                f"line {lineno}: unknown typology {typology!r}; allowed: {', '.join(TYPOLOGIES)}"
            )
        image_path, text_path = base / image, base / text
        if check_files:
            for p in (image_path, text_path):
                if not p.is_file():
                    problems.append(f"line {lineno}: missing file {p}")
        docs.append(Document(doc_id, image_path, text_path, typology, series))
    if problems:
        raise ManifestError(problems)
    return docs


def write_manifest(path, docs) -> None:
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for d in docs:
        paths = []
        for p in (d.image_path, d.transcription_path):
            p = Path(p).resolve()
            try:
                paths.append(str(p.relative_to(base)))
            except ValueError:
                paths.append(str(p))
        lines.append("\t".join([d.id, *paths, d.typology, d.series_code]))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _by_key(docs, key):
    groups = defaultdict(list)
    for d in docs:
        groups[key(d)].append(d)
    return groups


def sample_by_series(docs, rng: np.random.Generator, fraction=SAMPLE_FRACTION,
                     minimum=MIN_PER_TYPOLOGY) -> list[Document]:
    """Per typology, draw ``ceil(fraction * n)`` documents from every series.

    If a typology ends up with fewer than ``minimum`` documents, more are drawn
    one per series in round-robin (series in code order, documents in a random
    order within each series) until the typology holds
    ``min(minimum, available)``.
    """
    chosen = []
    for typology in sorted(_by_key(docs, lambda d: d.typology)):
        members = [d for d in docs if d.typology == typology]
        series = _by_key(members, lambda d: d.series_code)
        queues, picked = {}, []
        for code in sorted(series):
            pool = sorted(series[code], key=lambda d: d.id)
            order = [pool[i] for i in rng.permutation(len(pool))]
            take = math.ceil(fraction * len(pool))
            picked += order[:take]
            queues[code] = order[take:]
        target = min(minimum, len(members))
        while len(picked) < target:
            for code in sorted(queues):
                if queues[code] and len(picked) < target:
                    picked.append(queues[code].pop(0))
        chosen += picked
    return chosen


def split_halves(sample, rng: np.random.Generator) -> SplitResult:
    """Stratified random halving; an odd typology gives its extra item to parameterization."""
    if not sample:
        raise ValueError("cannot split an empty sample")
    param, evaluation = [], []
    groups = _by_key(sample, lambda d: d.typology)
    for typology in sorted(groups):
        pool = sorted(groups[typology], key=lambda d: d.id)
        order = [pool[i] for i in rng.permutation(len(pool))]
        half = (len(order) + 1) // 2
        if len(order) % 2:
            log.warning("typology %r has an odd count (%d); parameterization half gets %d",
                        typology, len(order), half)
        param += order[:half]
        evaluation += order[half:]
    return SplitResult(param, evaluation)


WORDS = (
    "RELATÓRIO", "CENSURA", "LIVRO", "PROCESSO", "TEATRO", "CARTA", "SERVIÇO",
    "DIRECÇÃO", "COMISSÃO", "EXAME", "AUTOR", "EDIÇÃO", "LISBOA", "PORTO",
    "PROIBIDO", "AUTORIZADO", "PEÇA", "SESSÃO", "PARECER", "INFORMAÇÃO", "OBRA",
    "PUBLICAÇÃO", "REVISTA", "JORNAL", "N.º", "Nº", "DE", "DA", "DO", "EM", "A", "O",
    "E", "COM", "PARA", "POR", "SEM", "CORTES", "ACTO", "CENA", "DATA", "ANO",
    "ARQUIVO", "SECRETARIADO", "NACIONAL", "P.I.D.E.", "ENVIADO", "PELA", "SÉRIE",
    "1958", "1962", "3089", "12/04", "FL.", "VISTO", "CÓPIA", "ORIGINAL", "NÃO",
)

LINE_WIDTH = 24


def synthetic_text(rng: np.random.Generator, lines=(2, 4), width=LINE_WIDTH) -> str:
    out = []
    for _ in range(int(rng.integers(lines[0], lines[1] + 1))):
        line = []
        while True:
            w = WORDS[int(rng.integers(len(WORDS)))]
            if line and len(" ".join(line + [w])) > width:
                break
            line.append(w)
            if len(" ".join(line)) >= width - 2:
                break
        out.append(" ".join(line)[:width])
    return "\n".join(out)


def _allocate(count, mix):
    """Largest-remainder apportionment of ``count`` items to the typology mix."""
    names = [t for t in TYPOLOGIES if mix.get(t, 0) > 0]
    quotas = [count * mix[t] for t in names]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(names)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[:count - sum(alloc)]:
        alloc[i] += 1
    return [t for t, n in zip(names, alloc) for _ in range(n)]


def generate_synthetic(count: int, typology_mix, noise: NoiseProfile, seed: int, out_dir,
                       scale: int = 3) -> list[Document]:
    """Write ``count`` rendered documents plus ``manifest.tsv`` and ``provenance.json``."""
    unknown = set(typology_mix) - set(TYPOLOGIES)
    if unknown:
        raise ValueError(f"unknown typologies {sorted(unknown)}; allowed: {', '.join(TYPOLOGIES)}")
    if any(v < 0 for v in typology_mix.values()):
        raise ValueError("typology proportions must be non-negative")
    if abs(sum(typology_mix.values()) - 1.0) > 1e-9:
        raise ValueError(f"typology proportions must sum to 1, got {sum(typology_mix.values())}")
    if count < 1:
        raise ValueError("count must be positive")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    labels = _allocate(count, typology_mix)
    docs = []
    for i, typology in enumerate(labels):
        rng = np.random.default_rng([seed, i])
        text = synthetic_text(rng)
        doc_id = f"syn{i:04d}"
        img = render_synthetic(text, noise, seed=int(rng.integers(2**63 - 1)), scale=scale)
        image_path = out_dir / "images" / f"{doc_id}.pgm"
        text_path = out_dir / "gt" / f"{doc_id}.txt"
        write_pgm(image_path, img)
        text_path.write_text(text + "\n", encoding="utf-8")
        docs.append(Document(doc_id, image_path, text_path, typology, f"SYN/{typology}/1"))
    write_manifest(out_dir / "manifest.tsv", docs)
    provenance = {"seed": seed, "count": count, "typology_mix": dict(sorted(typology_mix.items())),
                  "noise": asdict(noise), "scale": scale}
    (out_dir / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return docs


@dataclass(frozen=True, eq=False)
class Sample:
    """A document with its raster and ground truth loaded into memory."""

    doc: Document
    raster: object
    text: str

    @property
    def id(self):
        return self.doc.id


def load_samples(docs) -> list[Sample]:
    return [Sample(d, read_pgm(d.image_path), d.ground_truth()) for d in docs]
