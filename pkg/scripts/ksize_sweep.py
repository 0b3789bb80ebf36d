"""Exhaustive kernel-size sweep of the smoothing operators against noise level.

Renders one synthetic corpus per noise level, applies every odd ksize of
each smoother and records the mean mock character accuracy.  The table is
the oracle the tuner should agree with on these one-gene search spaces.

Example::

    python scripts/ksize_sweep.py --out runs/ksize_sweep.csv --noise-p 0 0.05 0.15 0.3
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from ocrtune import corpus as C
from ocrtune.imaging import apply_operator
from ocrtune.metrics import character_accuracy
from ocrtune.ocr import MockEngine, NoiseProfile, render_synthetic

SMOOTHERS = {
    "median_blur": lambda k: {"ksize": k},
    "box_blur": lambda k: {"ksize": k, "borderType": 1},
    "gaussian_blur": lambda k: {"ksize": k, "borderType": 1},
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--noise-p", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.15, 0.2, 0.3])
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--max-ksize", type=int, default=11)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=3)
    args = p.parse_args(argv)

    engine = MockEngine(scale=args.scale)
    rng = np.random.default_rng(args.seed)
    texts = [C.synthetic_text(rng) for _ in range(args.docs)]
    rows = []
    for noise_p in args.noise_p:
        rasters = [render_synthetic(t, NoiseProfile(noise_p), seed=args.seed * 1000 + i, scale=args.scale)
                   for i, t in enumerate(texts)]
        for op, make in SMOOTHERS.items():
            for k in range(1, args.max_ksize + 1, 2):
                acc = np.mean([character_accuracy(t, engine.recognize(apply_operator(op, r, make(k))))
                               for t, r in zip(texts, rasters)])
                rows.append((noise_p, op, k, f"{acc:.4f}"))
            best = max((r for r in rows if r[0] == noise_p and r[1] == op), key=lambda r: float(r[3]))
            print(f"p={noise_p:<5} {op:<14} best ksize {best[2]} ({float(best[3]):.2f})")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["noise_p", "operator", "ksize", "mean_character_accuracy"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
