"""``ocrtune`` command line: one subcommand per pipeline stage.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a run
fails (engine or I/O).  Every subcommand accepts ``--config FILE`` holding a
JSON object whose keys are that subcommand's long option names (dashes or
underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import corpus as C
from . import evalharness as E
from . import params as P
from . import tuner as T
from .imaging import InvalidParameter, apply_operator
from .metrics import UndefinedMetric
from .ocr import EngineFailure, NoiseProfile, make_engine
from .raster import MalformedInput, read_pgm, write_pgm

log = logging.getLogger("ocrtune")

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _engine_options(p):
    g = p.add_argument_group("OCR engine")
    g.add_argument("--engine", choices=["mock", "tesseract"], default="mock")
    g.add_argument("--tesseract-bin", default="tesseract",
                   help="engine binary (the OCRTUNE_TESSERACT variable overrides it)")
    g.add_argument("--lang", default="por")
    g.add_argument("--psm", type=int, default=None)
    g.add_argument("--scale", type=int, default=3, help="glyph scale of synthetic rasters")
    g.add_argument("--engine-seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1, help="concurrent OCR invocations")


def _build_engine(args):
    if args.engine == "mock":
        return make_engine("mock", scale=args.scale, seed=args.engine_seed)
    return make_engine("tesseract", binary=args.tesseract_bin, lang=args.lang, psm=args.psm,
                       max_concurrent=args.workers)


def build_parser() -> _Parser:
    parser = _Parser(prog="ocrtune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", type=Path)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--mix", default="letter=1", help="typology proportions, e.g. letter=0.5,other=0.5")
    p.add_argument("--noise-p", type=float, default=0.0)
    p.add_argument("--contrast", type=float, default=1.0)
    p.add_argument("--background", type=int, default=255)
    p.add_argument("--scale", type=int, default=3)

    p = sub.add_parser("split", help="sample by series and split into two halves")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--sample", action="store_true", help="apply per-series sampling first")

    p = sub.add_parser("tune", help="tune operator parameters with NSGA-II")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--algorithm", action="append", help="operator name (repeatable) or 'all'")
    p.add_argument("--mode", choices=["global", "per-typology"], default="global")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--generations", type=int, default=30)
    p.add_argument("--crossover-rate", type=float, default=0.9)
    p.add_argument("--mutation-rate", type=float, default=None)
    p.add_argument("--aggregation", choices=["sum", "mean"], default="sum")
    _engine_options(p)

    p = sub.add_parser("apply", help="apply one operator to a P5 image")
    p.add_argument("--algorithm")
    p.add_argument("--params", type=Path, help="file holding an 'algorithm key=value ...' line")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("ocr", help="recognise a P5 image")
    p.add_argument("--in", dest="input", type=Path)
    p.add_argument("--out", type=Path)
    _engine_options(p)

    p = sub.add_parser("evaluate", help="score scenarios on a manifest")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--algorithm", action="append", help="operator name (repeatable) or 'all'")
    p.add_argument("--scenario", action="append", choices=list(E.SCENARIOS))
    p.add_argument("--params-dir", type=Path, help="directory of tuned *.params files")
    p.add_argument("--reference-params", action="store_true",
                   help="use the published tuned values for global/typology scenarios")
    p.add_argument("--out", type=Path)
    _engine_options(p)

    p = sub.add_parser("compare", help="statistical comparison reports from records")
    p.add_argument("--records", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--scenario", choices=list(E.SCENARIOS), default=None)

    p = sub.add_parser("errors", help="edit-operation frequency table from records")
    p.add_argument("--records", type=Path)
    p.add_argument("--out", type=Path)

    for name in sub.choices:
        sub.choices[name].add_argument("--config", type=Path, help="JSON configuration file")
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: " + ", ".join(parser._subparsers._group_actions[0].choices))
    if getattr(args, "config", None) is None:
        return args
    try:
        config = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions} - {"help", "config"}
    config = {k.replace("-", "_"): v for k, v in config.items()}
    unknown = sorted(set(config) - dests)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    sub.set_defaults(**config)
    return parser.parse_args(argv)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


def _algorithms(args):
    names = args.algorithm or []
    if "all" in names:
        return list(P.ALGORITHMS)
    for n in names:
        P.schema(n)
    return names


def _parse_mix(text):
    mix = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"bad --mix entry {item!r}; expected typology=proportion")
        mix[key.strip()] = float(val)
    return mix


def cmd_synth(args):
    _require(args, "out", "seed")
    noise = NoiseProfile(args.noise_p, args.contrast, args.background)
    docs = C.generate_synthetic(args.count, _parse_mix(args.mix), noise, args.seed, args.out,
                                scale=args.scale)
    print(f"wrote {len(docs)} documents to {args.out}")


def cmd_split(args):
    _require(args, "manifest", "seed", "out")
    docs = C.load_manifest(args.manifest)
    if not docs:
        raise ValueError(f"{args.manifest}: manifest is empty")
    rng = np.random.default_rng(args.seed)
    if args.sample:
        docs = C.sample_by_series(docs, rng)
    result = C.split_halves(docs, rng)
    args.out.mkdir(parents=True, exist_ok=True)
    C.write_manifest(args.out / "parameterization.tsv", result.parameterization)
    C.write_manifest(args.out / "evaluation.tsv", result.evaluation)
    print(f"parameterization: {len(result.parameterization)}  evaluation: {len(result.evaluation)}")


def cmd_tune(args):
    _require(args, "manifest", "algorithm", "seed", "out")
    algorithms = _algorithms(args)
    samples = C.load_samples(C.load_manifest(args.manifest))
    if not samples:
        raise ValueError(f"{args.manifest}: manifest is empty")
    config = T.TunerConfig(args.population, args.generations, args.crossover_rate,
                           args.mutation_rate, args.seed, args.aggregation, args.workers)
    engine = _build_engine(args)
    if args.mode == "global":
        scopes = {"global": samples}
    else:
        scopes = {}
        for s in samples:
            scopes.setdefault(s.doc.typology, []).append(s)
    args.out.mkdir(parents=True, exist_ok=True)
    for algorithm in algorithms:
        for scope in sorted(scopes):
            result = T.evolve(algorithm, scopes[scope], engine, config)
            chosen = T.select_solution(result.front)
            stem = args.out / f"{algorithm}.{scope}"
            Path(f"{stem}.params").write_text(chosen.to_text() + "\n", encoding="utf-8")
            T.write_history(f"{stem}.history.csv", result.history)
            T.write_front(f"{stem}.front.txt", result.front)
            print(f"{scope}: {chosen.to_text()}")


def _assignment_from_args(args):
    if args.params is not None:
        return T.read_assignment(args.params)
    _require(args, "algorithm")
    values = P.defaults(args.algorithm).as_dict()
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep or key not in values:
            raise UsageError(f"bad --set {item!r}; parameters of {args.algorithm}: {', '.join(values)}")
        values[key] = int(val)
    a = P.ParamAssignment.of(args.algorithm, values)
    P.validate(a)
    return a


def cmd_apply(args):
    _require(args, "input", "out")
    a = _assignment_from_args(args)
    write_pgm(args.out, apply_operator(a.algorithm, read_pgm(args.input), a.as_dict()))
    print(a.to_text())


def cmd_ocr(args):
    _require(args, "input")
    text = _build_engine(args).recognize(read_pgm(args.input))
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def load_tuned(params_dir) -> dict:
    """Map (algorithm, scope) to the assignment in ``<algorithm>.<scope>.params``."""
    tuned = {}
    for path in sorted(Path(params_dir).glob("*.params")):
        algorithm, _, scope = path.stem.partition(".")
        a = T.read_assignment(path)
        if a.algorithm != algorithm:
            raise ValueError(f"{path}: file names {algorithm!r} but holds {a.algorithm!r}")
        tuned[(algorithm, scope)] = a
    return tuned


def reference_table() -> dict:
    tuned = {}
    for algorithm in P.ALGORITHMS:
        for scope in P.REFERENCE_SCOPES:
            a = P.reference_tuned(algorithm, scope)
            if a is not None:
                tuned[(algorithm, scope)] = a
    return tuned


def cmd_evaluate(args):
    _require(args, "manifest", "out")
    scenarios = args.scenario or ["none", "default"]
    algorithms = _algorithms(args)
    if any(s != "none" for s in scenarios) and not algorithms:
        raise UsageError("evaluate: --algorithm is required for scenarios other than 'none'")
    tuned = {}
    if args.reference_params:
        tuned.update(reference_table())
    if args.params_dir is not None:
        tuned.update(load_tuned(args.params_dir))
    samples = C.load_samples(C.load_manifest(args.manifest))
    engine = _build_engine(args)
    records = []
    for scenario in scenarios:
        for op in (["none"] if scenario == "none" else algorithms):
            records += E.evaluate_scenario(samples, scenario, op, engine, tuned, args.workers)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    E.write_records(args.out, records)
    for row in E.mean_table(records):
        print(f"{row['scenario']:>9} {row['operator']:<20} "
              f"accuracy={row['mean_character_accuracy']:.2f} f1={row['mean_f1']:.4f}")


def cmd_compare(args):
    _require(args, "records", "out")
    for path in E.render_reports(E.read_records(args.records), args.out, scenario=args.scenario):
        print(path)


def cmd_errors(args):
    _require(args, "records", "out")
    table = E.error_frequency_table(E.read_records(args.records))
    E.write_error_table(args.out, table)
    print(args.out)


COMMANDS = {
    "synth": cmd_synth, "split": cmd_split, "tune": cmd_tune, "apply": cmd_apply,
    "ocr": cmd_ocr, "evaluate": cmd_evaluate, "compare": cmd_compare, "errors": cmd_errors,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EngineFailure, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, KeyError, MalformedInput, InvalidParameter, UndefinedMetric) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
