"""Closed-loop experiment on synthetic corpora with the mock engine.

For each seed: generate a noisy corpus, split it into halves, tune each
operator on the first half, then score the second half under the none,
default and tuned (global) scenarios.  Records and the statistical reports
land in ``--out/seed-<n>``; a per-seed mean table is printed.

Example::

    python scripts/closed_loop.py --out runs/closed-loop --seeds 0 1 2
"""

import argparse
import logging
import tempfile
from pathlib import Path

import numpy as np

from ocrtune import corpus as C
from ocrtune import evalharness as E
from ocrtune import params as P
from ocrtune import tuner as T
from ocrtune.ocr import MockEngine, NoiseProfile


def run_seed(seed, args, out_dir):
    engine = MockEngine(scale=args.scale)
    with tempfile.TemporaryDirectory() as tmp:
        docs = C.generate_synthetic(args.docs, {"letter": 1.0}, NoiseProfile(args.noise_p), seed, tmp,
                                    scale=args.scale)
        split = C.split_halves(docs, np.random.default_rng(seed))
        tune, held_out = C.load_samples(split.parameterization), C.load_samples(split.evaluation)
    records = E.evaluate_scenario(held_out, "none", "none", engine)
    config = T.TunerConfig(args.population, args.generations, seed=seed)
    for op in args.algorithm:
        res = T.evolve(op, tune, engine, config)
        chosen = T.select_solution(res.front)
        T.write_history(out_dir / f"{op}.history.csv", res.history)
        (out_dir / f"{op}.global.params").write_text(chosen.to_text() + "\n", encoding="utf-8")
        records += E.evaluate_scenario(held_out, "default", op, engine)
        records += E.evaluate_scenario(held_out, "global", op, engine, {(op, "global"): chosen})
    E.write_records(out_dir / "records.csv", records)
    E.render_reports(records, out_dir / "reports", scenario="global")
    return records


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--noise-p", type=float, default=0.15)
    p.add_argument("--scale", type=int, default=3)
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--generations", type=int, default=30)
    p.add_argument("--algorithm", nargs="+", default=["median_blur", "box_blur"], choices=P.ALGORITHMS)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    for seed in args.seeds:
        out_dir = args.out / f"seed-{seed}"
        out_dir.mkdir(parents=True, exist_ok=True)
        records = run_seed(seed, args, out_dir)
        print(f"seed {seed}")
        for row in E.mean_table(records):
            print(f"  {row['scenario']:>8} {row['operator']:<20} {row['mean_character_accuracy']:6.2f}")


if __name__ == "__main__":
    main()
