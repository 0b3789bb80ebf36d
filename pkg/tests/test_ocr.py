import stat
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from ocrtune import imaging as I
from ocrtune.metrics import character_accuracy, edit_distance
from ocrtune.ocr import (FONT, TESSERACT_ENV, EngineFailure, MockEngine, NoiseProfile,
                         TesseractEngine, make_engine, render_synthetic)
from ocrtune.raster import MalformedInput, Raster

TEXT = "RELATÓRIO N.º 3089\nCENSURA À PEÇA"


def test_glyphs_distinct():
    bits = FONT.bits
    assert len({b.tobytes() for b in bits}) == len(bits)
    assert bits.shape[1] == 35
    for ch in "ÁÀÂÃÇÉÊÍÓÔÕÚ0123456789.,-:/º ":
        assert FONT.supports(ch)


def test_clean_round_trip():
    eng = MockEngine()
    assert eng.recognize(render_synthetic("ABC 12")) == "ABC 12"
    assert eng.recognize(render_synthetic(TEXT)) == TEXT


@pytest.mark.parametrize("scale", [1, 2, 4])
def test_round_trip_other_scales(scale):
    r = render_synthetic(TEXT, scale=scale)
    assert r.height == 2 * 8 * scale
    assert MockEngine(scale=scale).recognize(r) == TEXT


def test_render_deterministic_and_seeded():
    n = NoiseProfile(0.2)
    assert render_synthetic(TEXT, n, seed=4) == render_synthetic(TEXT, n, seed=4)
    assert render_synthetic(TEXT, n, seed=4) != render_synthetic(TEXT, n, seed=5)


def test_render_rejects_unknown_characters():
    with pytest.raises(MalformedInput):
        render_synthetic("abc")


def test_contrast_pulls_towards_grey():
    r = render_synthetic("A", NoiseProfile(contrast_scale=0.5, background=255))
    # ink 0 -> 64, background 255 -> 191.5 -> 192
    assert set(np.unique(r.pixels)) == {64, 192}
    assert MockEngine().recognize(r) == "A"


def test_noise_profile_validation():
    for bad in ({"salt_pepper_p": 1.5}, {"contrast_scale": 0}, {"background": 300}):
        with pytest.raises(ValueError):
            NoiseProfile(**bad)


def test_noise_degrades_and_median_restores():
    eng = MockEngine()
    r = render_synthetic(TEXT, NoiseProfile(0.3), seed=2)
    noisy = edit_distance(TEXT, eng.recognize(r))
    assert noisy > 0
    light = render_synthetic(TEXT, NoiseProfile(0.1), seed=2)
    assert edit_distance(TEXT, eng.recognize(I.median_blur(light, 3))) <= edit_distance(TEXT, eng.recognize(light))


def test_monotone_degradation_over_seeds():
    eng = MockEngine()
    means = []
    for p in (0.0, 0.05, 0.1, 0.2):
        acc = [character_accuracy(TEXT, eng.recognize(render_synthetic(TEXT, NoiseProfile(p), seed=s)))
               for s in range(20)]
        means.append(np.mean(acc))
    assert means[0] == 100
    assert all(a >= b for a, b in zip(means, means[1:]))


def test_full_noise_is_chance_level():
    r = render_synthetic(TEXT, NoiseProfile(1.0), seed=0)
    assert set(np.unique(r.pixels)) <= {0, 255}
    assert 0.4 < (r.pixels == 255).mean() < 0.6
    accs = [character_accuracy(TEXT, MockEngine().recognize(render_synthetic(TEXT, NoiseProfile(1.0), seed=s)))
            for s in range(10)]
    assert np.mean(accs) < 20


def test_mock_deterministic_and_unaligned_prefix():
    r = render_synthetic(TEXT, NoiseProfile(0.25), seed=9)
    assert MockEngine(seed=1).recognize(r) == MockEngine(seed=1).recognize(r)
    padded = Raster(np.pad(render_synthetic("AB").pixels, ((0, 5), (0, 7)), constant_values=255))
    assert MockEngine().recognize(padded) == "AB"
    assert MockEngine().recognize(Raster(np.zeros((3, 3), np.uint8))) == ""


@pytest.fixture
def fake_tesseract(tmp_path):
    script = tmp_path / "fake-tesseract"
    log = tmp_path / "calls.txt"
    spans = tmp_path / "spans.txt"
    script.write_text(
        f"#!{sys.executable}\n"
        "import os, sys, pathlib, time\n"
        "t0 = time.time(); time.sleep(float(os.environ.get('FAKE_SLEEP', '0')))\n"
        f"open({str(spans)!r}, 'a').write(f'{{t0}} {{time.time()}}\\n')\n"
        f"open({str(log)!r}, 'a').write(' '.join(sys.argv[1:]) + '\\n')\n"
        "data = pathlib.Path(sys.argv[1]).read_bytes()\n"
        "if not data.startswith(b'P5'):\n"
        "    sys.exit(3)\n"
        "if 'fail' in sys.argv:\n"
        "    sys.stderr.write('boom'); sys.exit(1)\n"
        "if 'silent' in sys.argv:\n"
        "    sys.exit(0)\n"
        "pathlib.Path(sys.argv[2] + '.txt').write_text('Olá mundo\\n', encoding='utf-8')\n"
    )
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return script, log


def test_tesseract_adapter_invocation(fake_tesseract):
    script, log = fake_tesseract
    eng = TesseractEngine(binary=str(script), psm=6)
    assert eng.recognize(render_synthetic("A")) == "Olá mundo"
    args = log.read_text().split()
    assert args[0].endswith("input.pgm") and args[2:] == ["-l", "por", "--psm", "6"]


def test_tesseract_failures(fake_tesseract, tmp_path):
    script, _ = fake_tesseract
    with pytest.raises(EngineFailure) as exc:
        TesseractEngine(binary=str(script), extra_args=("fail",)).recognize(render_synthetic("A"))
    assert "boom" in exc.value.diagnostics
    with pytest.raises(EngineFailure):
        TesseractEngine(binary=str(script), extra_args=("silent",)).recognize(render_synthetic("A"))
    with pytest.raises(EngineFailure):
        TesseractEngine(binary=str(tmp_path / "missing")).recognize(render_synthetic("A"))


def test_tesseract_env_override(fake_tesseract, monkeypatch):
    script, _ = fake_tesseract
    monkeypatch.setenv(TESSERACT_ENV, str(script))
    eng = make_engine("tesseract", binary="/does/not/exist")
    assert eng.resolved_binary() == str(script)
    assert eng.recognize(render_synthetic("A")) == "Olá mundo"


def test_tesseract_concurrency_cap(fake_tesseract, monkeypatch):
    script, log = fake_tesseract
    monkeypatch.setenv("FAKE_SLEEP", "0.3")
    eng = TesseractEngine(binary=str(script), max_concurrent=2)
    with ThreadPoolExecutor(4) as pool:
        out = list(pool.map(eng.recognize, [render_synthetic("A")] * 6))
    assert out == ["Olá mundo"] * 6
    spans = [tuple(map(float, line.split())) for line in (log.parent / "spans.txt").read_text().splitlines()]
    assert len(spans) == 6
    events = sorted([(a, 1) for a, _ in spans] + [(b, -1) for _, b in spans])
    running = peak = 0
    for _, step in events:
        running += step
        peak = max(peak, running)
    assert peak <= 2


def test_make_engine_kinds():
    assert isinstance(make_engine("mock", scale=2), MockEngine)
    with pytest.raises(ValueError):
        make_engine("abbyy")
