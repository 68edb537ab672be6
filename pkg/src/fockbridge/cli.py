"""Command line entry point.

    fockbridge run <config.json>
    fockbridge suite <dir>
    fockbridge reduce "<expr>" [--normal-product]
    fockbridge version

Reports go under ``$FOCKBRIDGE_OUTPUT`` (default ``./fockbridge-out``) unless
``--output`` is given.  Exit status: 0 all checks pass, 1 some check failed or
an experiment raised, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import ExperimentError, ExperimentResult, run_experiment
from .parsing import ParseError, normal_product_text, reduce_text
from .reports import append_csv, csv_rows, dumps_record, experiment_record

OUTPUT_ENV = "FOCKBRIDGE_OUTPUT"
DEFAULT_OUTPUT = "fockbridge-out"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def output_root(explicit: str | None = None) -> str:
    return explicit or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def write_result(result: ExperimentResult, root: str) -> str:
    """Write ``<name>.json``, any artifacts, and append to ``summary.csv``; return the JSON path."""
    cfg = result.config
    os.makedirs(root, exist_ok=True)
    extra = dict(result.extra, config=cfg.descriptor())
    record = experiment_record(cfg.name, cfg.kind, result.reports, basis=result.basis,
                               seed=cfg.seed, timestamp=_timestamp(), extra=extra)
    path = os.path.join(root, f"{cfg.name}.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_record(record))
    for suffix, text in result.artifacts.items():
        with open(os.path.join(root, f"{cfg.name}-{suffix}"), "w", encoding="utf-8") as fh:
            fh.write(text)
    append_csv(os.path.join(root, "summary.csv"), csv_rows(cfg.name, cfg.seed, result.reports))
    return path


def _print_result(result: ExperimentResult, out=None) -> None:
    out = sys.stdout if out is None else out
    cfg = result.config
    flag = "PASS" if result.passed else "FAIL"
    print(f"{flag} {cfg.name} ({cfg.kind}): {sum(r.passed for r in result.reports)}/{len(result.reports)} checks",
          file=out)
    for r in result.reports:
        if not r.passed:
            print("  " + r.summary_line(), file=out)


def run_one(cfg: ExperimentConfig, root: str, out=None) -> ExperimentResult:
    result = run_experiment(cfg)
    write_result(result, root)
    _print_result(result, out)
    return result


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_one(cfg, output_root(args.output))
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_suite(args) -> int:
    if not os.path.isdir(args.directory):
        print(f"error: no such directory: {args.directory}", file=sys.stderr)
        return EXIT_USAGE
    root = output_root(args.output)
    names = sorted(f for f in os.listdir(args.directory) if f.endswith(".json"))
    entries, config_errors = [], 0
    for fname in names:
        path = os.path.join(args.directory, fname)
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            entries.append({"config": fname, "status": "config-error", "message": str(exc)})
            config_errors += 1
            continue
        try:
            result = run_one(cfg, root)
        except ExperimentError as exc:
            print(f"error: {exc}", file=sys.stderr)
            entries.append({"config": fname, "name": cfg.name, "status": "error", "message": str(exc)})
            continue
        entries.append({"config": fname, "name": cfg.name, "status": "pass" if result.passed else "fail",
                        "checks": len(result.reports),
                        "failed_checks": [r.check for r in result.reports if not r.passed]})
    passed = sum(e["status"] == "pass" for e in entries)
    aggregate = {"directory": os.path.abspath(args.directory), "total": len(entries), "passed": passed,
                 "failed": len(entries) - passed, "experiments": entries, "timestamp": _timestamp()}
    os.makedirs(root, exist_ok=True)
    with open(os.path.join(root, "suite.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    print(f"suite: {passed}/{len(entries)} experiments passed")
    if config_errors:
        return EXIT_USAGE
    return EXIT_PASS if passed == len(entries) else EXIT_FAIL


def cmd_reduce(args) -> int:
    try:
        fn = normal_product_text if args.normal_product else reduce_text
        print(fn(args.expr, args.modes))
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_PASS


def cmd_version(args) -> int:
    print(f"fockbridge {__version__}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockbridge",
                                description="Classical ensembles versus normal-ordered operators on a truncated Fock space.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run every *.json config in a directory, in name order")
    s.add_argument("directory")
    s.add_argument("--output")
    s.set_defaults(func=cmd_suite)

    d = sub.add_parser("reduce", help="print the canonical normal form of an operator expression")
    d.add_argument("expr")
    d.add_argument("--modes", type=int, default=None)
    d.add_argument("--normal-product", action="store_true",
                   help="reorder without commutator corrections")
    d.set_defaults(func=cmd_reduce)

    v = sub.add_parser("version")
    v.set_defaults(func=cmd_version)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
