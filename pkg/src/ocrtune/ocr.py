"""OCR engines: an external Tesseract process and a deterministic mock.

The mock reads rasters produced by :func:`render_synthetic`.  Text is laid out
on a grid of cells of ``(5 + 1) * scale`` by ``(7 + 1) * scale`` pixels, one
5x7 glyph per cell drawn dark on a light background, each glyph pixel blown up
to a ``scale x scale`` block.  With ``scale=1`` the cell is exactly the bare
6x8 grid; the default ``scale=3`` keeps strokes wide enough that a 3x3 filter
does not erase them.
"""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .raster import MalformedInput, Raster, round_half_away, write_pgm

log = logging.getLogger(__name__)

GLYPH_W, GLYPH_H = 5, 7

_GLYPH_ROWS = {
    "A": "01110 10001 10001 11111 10001 10001 10001",
    "B": "11110 10001 10001 11110 10001 10001 11110",
    "C": "01110 10001 10000 10000 10000 10001 01110",
    "D": "11100 10010 10001 10001 10001 10010 11100",
    "E": "11111 10000 10000 11110 10000 10000 11111",
    "F": "11111 10000 10000 11110 10000 10000 10000",
    "G": "01110 10001 10000 10111 10001 10001 01111",
    "H": "10001 10001 10001 11111 10001 10001 10001",
    "I": "01110 00100 00100 00100 00100 00100 01110",
    "J": "00111 00010 00010 00010 00010 10010 01100",
    "K": "10001 10010 10100 11000 10100 10010 10001",
    "L": "10000 10000 10000 10000 10000 10000 11111",
    "M": "10001 11011 10101 10101 10001 10001 10001",
    "N": "10001 10001 11001 10101 10011 10001 10001",
    "O": "01110 10001 10001 10001 10001 10001 01110",
    "P": "11110 10001 10001 11110 10000 10000 10000",
    "Q": "01110 10001 10001 10001 10101 10010 01101",
    "R": "11110 10001 10001 11110 10100 10010 10001",
    "S": "01111 10000 10000 01110 00001 00001 11110",
    "T": "11111 00100 00100 00100 00100 00100 00100",
    "U": "10001 10001 10001 10001 10001 10001 01110",
    "V": "10001 10001 10001 10001 10001 01010 00100",
    "W": "10001 10001 10001 10101 10101 10101 01010",
    "X": "10001 10001 01010 00100 01010 10001 10001",
    "Y": "10001 10001 01010 00100 00100 00100 00100",
    "Z": "11111 00001 00010 00100 01000 10000 11111",
    "Á": "00010 00100 01110 10001 11111 10001 10001",
    "À": "01000 00100 01110 10001 11111 10001 10001",
    "Â": "00100 01010 01110 10001 11111 10001 10001",
    "Ã": "01101 10110 01110 10001 11111 10001 10001",
    "Ç": "01110 10001 10000 10000 10001 01110 00100",
    "É": "00010 00100 11111 10000 11110 10000 11111",
    "Ê": "00100 01010 11111 10000 11110 10000 11111",
    "Í": "00010 00100 01110 00100 00100 00100 01110",
    "Ó": "00010 00100 01110 10001 10001 10001 01110",
    "Ô": "00100 01010 01110 10001 10001 10001 01110",
    "Õ": "01101 10110 01110 10001 10001 10001 01110",
    "Ú": "00010 00100 10001 10001 10001 10001 01110",
    "0": "01110 10001 10011 10101 11001 10001 01110",
    "1": "00100 01100 00100 00100 00100 00100 01110",
    "2": "01110 10001 00001 00010 00100 01000 11111",
    "3": "11111 00010 00100 00010 00001 10001 01110",
    "4": "00010 00110 01010 10010 11111 00010 00010",
    "5": "11111 10000 11110 00001 00001 10001 01110",
    "6": "00110 01000 10000 11110 10001 10001 01110",
    "7": "11111 00001 00010 00100 01000 01000 01000",
    "8": "01110 10001 10001 01110 10001 10001 01110",
    "9": "01110 10001 10001 01111 00001 00010 01100",
    ".": "00000 00000 00000 00000 00000 01100 01100",
    ",": "00000 00000 00000 00000 01100 00100 01000",
    "-": "00000 00000 00000 11111 00000 00000 00000",
    ":": "00000 01100 01100 00000 01100 01100 00000",
    "/": "00000 00001 00010 00100 01000 10000 00000",
    "º": "01110 10001 01110 00000 11111 00000 00000",
    " ": "00000 00000 00000 00000 00000 00000 00000",
}


class GlyphFont:
    """Fixed 5x7 bitmap font; ``bits`` has one flattened row of 35 per glyph."""

    def __init__(self, rows=_GLYPH_ROWS):
        self.chars = tuple(rows)
        self.bits = np.array(
            [[c == "1" for c in spec.replace(" ", "")] for spec in rows.values()], dtype=bool
        )
        self._index = {c: i for i, c in enumerate(self.chars)}

    def __contains__(self, ch):
        return ch in self._index

    def bitmap(self, ch) -> np.ndarray:
        return self.bits[self._index[ch]].reshape(GLYPH_H, GLYPH_W)

    def supports(self, text: str) -> bool:
        return all(ch in self._index or ch == "\n" for ch in text)


FONT = GlyphFont()


class EngineFailure(RuntimeError):
    """The OCR engine could not produce output; ``diagnostics`` holds its stderr."""

    def __init__(self, message, diagnostics=""):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class NoiseProfile:
    salt_pepper_p: float = 0.0
    contrast_scale: float = 1.0
    background: int = 255

    def __post_init__(self):
        if not 0.0 <= self.salt_pepper_p <= 1.0:
            raise ValueError(f"salt_pepper_p must lie in [0, 1], got {self.salt_pepper_p}")
        if not 0.0 < self.contrast_scale <= 1.0:
            raise ValueError(f"contrast_scale must lie in (0, 1], got {self.contrast_scale}")
        if not 0 <= self.background <= 255:
            raise ValueError(f"background must lie in [0, 255], got {self.background}")


def render_synthetic(text: str, noise: NoiseProfile = NoiseProfile(), seed: int = 0,
                     scale: int = 3) -> Raster:
    """Draw ``text`` (lines separated by newlines) with the built-in font.

    Ink is 0 and the background is ``noise.background``.  Both are then pulled towards
    mid-grey by ``contrast_scale`` and finally each pixel is, with probability
    ``salt_pepper_p``, replaced by 0 or 255 with equal odds.
    """
    bad = sorted({ch for ch in text if ch != "\n" and ch not in FONT})
    if bad:
        raise MalformedInput(f"characters not in the glyph font: {''.join(bad)!r}")
    lines = text.split("\n")
    cols = max(1, max(len(line) for line in lines))
    cell_w, cell_h = (GLYPH_W + 1) * scale, (GLYPH_H + 1) * scale
    ink = np.zeros((len(lines) * (GLYPH_H + 1), cols * (GLYPH_W + 1)), dtype=bool)
    for row, line in enumerate(lines):
        for col, ch in enumerate(line):
            y, x = row * (GLYPH_H + 1), col * (GLYPH_W + 1)
            ink[y:y + GLYPH_H, x:x + GLYPH_W] = FONT.bitmap(ch)
    ink = np.kron(ink, np.ones((scale, scale), dtype=bool))
    assert ink.shape == (len(lines) * cell_h, cols * cell_w)
    img = np.where(ink, 0.0, float(noise.background))
    img = 128.0 + (img - 128.0) * noise.contrast_scale
    img = round_half_away(img)
    if noise.salt_pepper_p > 0:
        rng = np.random.default_rng(seed)
        hit = rng.random(img.shape) < noise.salt_pepper_p
        salt = rng.random(img.shape) < 0.5
        img = np.where(hit, np.where(salt, 255, 0), img).astype(np.uint8)
    return Raster(img)


class MockEngine:
    """Template-matching reader for :func:`render_synthetic` output.

    Each glyph cell is sampled at the centre of every ``scale x scale`` block,
    binarised at ``ink_threshold`` and matched to the font by Hamming distance.
    A cell whose best match is farther than ``reject_threshold`` bits is read
    as a deterministic wrong character chosen from a keyed hash of the cell.
    """

    kind = "synthetic-mock"

    def __init__(self, scale=3, seed=0, reject_threshold=10, ink_threshold=128):
        self.scale = scale
        self.seed = seed
        self.reject_threshold = reject_threshold
        self.ink_threshold = ink_threshold

    @property
    def config(self):
        return {"kind": self.kind, "scale": self.scale, "seed": self.seed,
                "reject_threshold": self.reject_threshold, "ink_threshold": self.ink_threshold}

    def _cell_bits(self, px):
        s = self.scale
        cell_w, cell_h = (GLYPH_W + 1) * s, (GLYPH_H + 1) * s
        rows, cols = px.shape[0] // cell_h, px.shape[1] // cell_w
        # centre sample of every glyph-pixel block in the aligned prefix
        ys = (np.arange(rows)[:, None] * cell_h + np.arange(GLYPH_H)[None, :] * s + s // 2).ravel()
        xs = (np.arange(cols)[:, None] * cell_w + np.arange(GLYPH_W)[None, :] * s + s // 2).ravel()
        sampled = px[np.ix_(ys, xs)] < self.ink_threshold
        bits = sampled.reshape(rows, GLYPH_H, cols, GLYPH_W).transpose(0, 2, 1, 3)
        return bits.reshape(rows, cols, GLYPH_H * GLYPH_W)

    def _reject(self, index, bits, best):
        h = hashlib.blake2b(digest_size=8)
        h.update(f"{self.seed}:{index}:".encode())
        h.update(np.packbits(bits).tobytes())
        pool = [c for c in FONT.chars if c != FONT.chars[best]]
        return pool[int.from_bytes(h.digest(), "big") % len(pool)]

    def recognize(self, r: Raster) -> str:
        cells = self._cell_bits(r.pixels)
        rows, cols = cells.shape[:2]
        flat = cells.reshape(-1, GLYPH_H * GLYPH_W)
        dist = (flat[:, None, :] != FONT.bits[None, :, :]).sum(axis=-1)
        best = dist.argmin(axis=1)
        best_d = dist[np.arange(len(flat)), best]
        chars = []
        for i in range(len(flat)):
            if best_d[i] > self.reject_threshold:
                chars.append(self._reject(i, flat[i], best[i]))
            else:
                chars.append(FONT.chars[best[i]])
        lines = ["".join(chars[k * cols:(k + 1) * cols]).rstrip() for k in range(rows)]
        return "\n".join(lines).rstrip()


TESSERACT_ENV = "OCRTUNE_TESSERACT"


@dataclass
class TesseractEngine:
    """Runs an external Tesseract-compatible binary on a temporary P5 file.

    The binary is called as ``<binary> <input.pgm> <outbase> -l <lang>
    [--psm N] [extra_args...]`` and must write ``<outbase>.txt``.  The
    ``OCRTUNE_TESSERACT`` environment variable overrides ``binary``.
    """

    binary: str = "tesseract"
    lang: str = "por"
    psm: int | None = None
    extra_args: tuple[str, ...] = ()
    timeout: float = 300.0
    max_concurrent: int = 4
    kind: str = field(default="external-process", init=False)

    def __post_init__(self):
        self._slots = threading.BoundedSemaphore(max(1, self.max_concurrent))

    @property
    def config(self):
        return {"kind": self.kind, "binary": self.resolved_binary(), "lang": self.lang,
                "psm": self.psm, "extra_args": list(self.extra_args)}

    def resolved_binary(self) -> str:
        return os.environ.get(TESSERACT_ENV) or self.binary

    def command(self, image_path, out_base) -> list[str]:
        cmd = [self.resolved_binary(), str(image_path), str(out_base), "-l", self.lang]
        if self.psm is not None:
            cmd += ["--psm", str(self.psm)]
        return cmd + list(self.extra_args)

    def recognize(self, r: Raster) -> str:
        binary = self.resolved_binary()
        if shutil.which(binary) is None and not Path(binary).is_file():
            raise EngineFailure(f"OCR binary not found: {binary!r}")
        with self._slots, tempfile.TemporaryDirectory(prefix="ocrtune-") as tmp:
            image_path = Path(tmp) / "input.pgm"
            out_base = Path(tmp) / "output"
            write_pgm(image_path, r)
            cmd = self.command(image_path, out_base)
            log.info("running OCR: %s", " ".join(cmd))
            try:
                proc = subprocess.run(cmd, capture_output=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise EngineFailure(f"OCR invocation failed: {exc}") from exc
            stderr = proc.stderr.decode("utf-8", "replace")
            if proc.returncode != 0:
                raise EngineFailure(f"OCR binary exited with status {proc.returncode}", stderr)
            out_file = out_base.with_suffix(".txt")
            if not out_file.exists():
                raise EngineFailure("OCR binary produced no output file", stderr)
            return out_file.read_text(encoding="utf-8").strip()


def make_engine(kind: str = "mock", **options):
    if kind in ("mock", "synthetic-mock"):
        return MockEngine(**options)
    if kind in ("tesseract", "external-process"):
        if "extra_args" in options:
            options["extra_args"] = tuple(options["extra_args"])
        return TesseractEngine(**options)
    raise ValueError(f"unknown engine kind {kind!r}; expected 'mock' or 'tesseract'")
