"""``continuum-lab`` command line.

Exit codes: 0 ok, 2 validation failure, 3 runtime or I/O failure,
4 archive divergence or corruption.
"""

import argparse
import csv
import json
import sys

from .archive import TRACE_ENV, load_archive, run_experiment, verify_repeatability
from .bench import preset_spec
from .errors import (
    ContinuumLabError,
    CorruptArchive,
    EvaluationError,
    ParameterBindingError,
    SchemaError,
    SpecInvalid,
    SpecSyntaxError,
    UnknownMetric,
    UnknownPreset,
)
from .mapping import load_pool
from .optimizer import STRATEGIES, Objective, bind_point, optimize_loop, sample_random, write_optimization_report
from .rng import SplitMix64
from .spec import load_spec, load_yaml, parse_space, validate_space, validate_spec
from .units import format_decimal, parse_duration_ns

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_DIVERGENT = 4

PRESET_NAMES = ("cloud_centric", "hybrid", "quadratic")


class _Exit(Exception):
    def __init__(self, code, message=""):
        self.code = code
        self.message = message


def _err(*lines):
    for line in lines:
        print(line, file=sys.stderr)


def _load_spec(args):
    if getattr(args, "preset", None):
        if args.spec:
            raise _Exit(EXIT_INVALID, "give either a spec file or --preset, not both")
        try:
            spec = preset_spec(args.preset)
        except UnknownPreset as exc:
            raise _Exit(EXIT_INVALID, str(exc))
    elif args.spec:
        try:
            spec = load_spec(args.spec)
        except OSError as exc:
            raise _Exit(EXIT_RUNTIME, f"cannot read {args.spec}: {exc}")
        except (SpecSyntaxError, SchemaError) as exc:
            raise _Exit(EXIT_INVALID, f"{type(exc).__name__}: {exc}")
    else:
        raise _Exit(EXIT_INVALID, "a spec file or --preset is required")
    if getattr(args, "seed", None) is not None:
        spec = spec.with_seed(args.seed)
    violations = validate_spec(spec)
    if violations:
        raise _Exit(EXIT_INVALID, "\n".join(str(v) for v in violations))
    return spec


def _load_pool(args):
    if not args.hosts:
        return None
    try:
        return load_pool(args.hosts)
    except OSError as exc:
        raise _Exit(EXIT_RUNTIME, f"cannot read {args.hosts}: {exc}")
    except (SchemaError, ValueError) as exc:
        raise _Exit(EXIT_INVALID, f"SchemaError: {exc}")


def cmd_validate(args):
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise _Exit(EXIT_RUNTIME, f"cannot read {args.spec}: {exc}")
    except (SpecSyntaxError, SchemaError) as exc:
        raise _Exit(EXIT_INVALID, f"{type(exc).__name__}: {exc}")
    violations = validate_spec(spec)
    if violations:
        raise _Exit(EXIT_INVALID, "\n".join(str(v) for v in violations))
    return EXIT_OK


def cmd_run(args):
    spec = _load_spec(args)
    pool = _load_pool(args)
    try:
        archive = run_experiment(spec, pool, args.out, strategy=args.mapping,
                                 sample_interval_ns=args.sample_interval)
    except SpecInvalid as exc:
        raise _Exit(EXIT_INVALID, "\n".join(str(v) for v in exc.violations))
    except OSError as exc:
        raise _Exit(EXIT_RUNTIME, f"cannot write archive: {exc}")
    completed = sum(r.completed_records for r in archive.repetitions)
    _err(f"wrote {args.out}: {spec.repetitions} repetition(s), {completed} completed record(s)")
    print(archive.manifest_digest)
    return EXIT_OK


def cmd_diff(args):
    try:
        result = verify_repeatability(args.archive_a, args.archive_b)
    except CorruptArchive as exc:
        print(f"CorruptArchive: {exc.path}")
        return EXIT_DIVERGENT
    if result.identical:
        print("IDENTICAL")
        return EXIT_OK
    print("DIVERGENT")
    for path in result.differences:
        print(path)
    return EXIT_DIVERGENT


def _parse_objectives(texts):
    try:
        return [Objective.parse(t) for t in texts]
    except UnknownMetric as exc:
        raise _Exit(EXIT_INVALID, f"unknown metric {exc.metric!r}")
    except ValueError as exc:
        raise _Exit(EXIT_INVALID, str(exc))


def cmd_optimize(args):
    spec = _load_spec(args)
    pool = _load_pool(args)
    objectives = _parse_objectives(args.objective)
    if args.weights is not None and len(args.weights) != len(objectives):
        raise _Exit(EXIT_INVALID, f"--weights needs {len(objectives)} value(s), got {len(args.weights)}")
    space = spec.parameters
    if args.space:
        try:
            with open(args.space, encoding="utf-8") as fh:
                space = parse_space(load_yaml(fh.read()))
        except OSError as exc:
            raise _Exit(EXIT_RUNTIME, f"cannot read {args.space}: {exc}")
        except (SpecSyntaxError, SchemaError) as exc:
            raise _Exit(EXIT_INVALID, f"{type(exc).__name__}: {exc}")
        bad = validate_space(space)
        if bad:
            raise _Exit(EXIT_INVALID, "\n".join(str(v) for v in bad))
    if not len(space):
        raise _Exit(EXIT_INVALID, "parameter space is empty")
    try:
        probe = bind_point(spec, sample_random(space, 1, SplitMix64(0))[0])
    except ParameterBindingError as exc:
        raise _Exit(EXIT_INVALID, f"ParameterBindingError: {exc}")
    bad = validate_spec(probe)
    if bad:
        raise _Exit(EXIT_INVALID, "\n".join(str(v) for v in bad))
    seed = spec.master_seed
    try:
        result = optimize_loop(spec, pool, space, objectives, args.strategy, args.budget, seed,
                               lam=args.lam, pool_size=args.pool_size, batch_size=args.batch_size,
                               weights=args.weights, out_dir=None,
                               sample_interval_ns=args.sample_interval)
    except EvaluationError as exc:
        if isinstance(exc.cause, SpecInvalid):
            raise _Exit(EXIT_INVALID, str(exc))
        raise _Exit(EXIT_RUNTIME, str(exc))
    except ContinuumLabError as exc:
        raise _Exit(EXIT_INVALID, str(exc))
    write_optimization_report(result, args.out)
    _err(f"wrote {args.out}: {result.budget_used} evaluation(s), pareto size {len(result.pareto)}")
    if result.best is not None:
        print(" ".join(f"{k}={v}" for k, v in result.best.point.items()))
    else:
        print(f"pareto_size={len(result.pareto)}")
    return EXIT_OK


def cmd_report(args):
    try:
        archive = load_archive(args.archive)
    except CorruptArchive as exc:
        print(f"CorruptArchive: {exc.path}", file=sys.stderr)
        return EXIT_DIVERGENT
    if args.format == "json":
        doc = {
            "name": archive.manifest.get("name"),
            "repetitions": [
                {
                    "repetition_index": rep.repetition_index,
                    "trace_digest": rep.trace_digest,
                    "completed_records": rep.completed_records,
                    "dropped": rep.dropped,
                    "summaries": {
                        m: {k: (v if k == "count" else format_decimal(v)) for k, v in s.as_dict().items()}
                        for m, s in rep.summaries.items()
                    },
                }
                for rep in archive.repetitions
            ],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["repetition", "metric", "count", "min", "max", "mean", "p50", "p95", "p99"])
        for rep in archive.repetitions:
            for m, s in rep.summaries.items():
                writer.writerow([rep.repetition_index, m, s.count,
                                 *(format_decimal(getattr(s, k)) for k in ("min", "max", "mean", "p50", "p95", "p99"))])
    return EXIT_OK


def _duration(text):
    try:
        value = parse_duration_ns(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if value <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="continuum-lab",
        description="Run reproducible edge-to-cloud experiments on a deterministic emulator.",
        epilog=f"Set {TRACE_ENV}=1 to store event traces in archives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an experiment file")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    def experiment_args(p):
        p.add_argument("spec", nargs="?")
        p.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--hosts", help="host pool YAML")
        p.add_argument("--seed", type=int, help="override the spec's master seed")
        p.add_argument("--out", required=True)
        p.add_argument("--sample-interval", type=_duration, default=1_000_000_000,
                       help="monitor sampling interval (default 1s)")

    p = sub.add_parser("run", help="run an experiment and write its archive")
    experiment_args(p)
    p.add_argument("--mapping", choices=("round_robin", "first_fit"), default="round_robin")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", help="compare two archives for repeatability")
    p.add_argument("archive_a")
    p.add_argument("archive_b")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("optimize", help="search the parameter space")
    experiment_args(p)
    p.add_argument("--space", help="YAML mapping name -> domain (overrides spec parameters)")
    p.add_argument("--strategy", choices=STRATEGIES, default="surrogate")
    p.add_argument("--budget", type=_positive_int, required=True)
    p.add_argument("--objective", action="append", required=True, metavar="METRIC:AGG:DIR")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--pool-size", type=_positive_int, default=64)
    p.add_argument("--batch-size", type=_positive_int, default=1)
    p.add_argument("--weights", type=lambda s: [float(w) for w in s.split(",")])
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", help="print metric summaries of an archive")
    p.add_argument("archive")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        if exc.message:
            _err(exc.message)
        return exc.code
    except ContinuumLabError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
