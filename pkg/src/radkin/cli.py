"""Command line entry point.

    radkin run <config.toml> [--out DIR] [--override section.key=value ...]
    radkin scan [--taus ...] [--ks ...] [--background cold|maxwellian] [--v-th X] [--out DIR]
    radkin validate <config.toml> [--override ...]
    radkin schema [scenario]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

from .config import SCENARIOS, describe_schema, load_config, validate
from .errors import ConfigError, RadkinError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _report_config_error(exc: ConfigError):
    print("configuration error:", file=sys.stderr)
    for e in exc.errors:
        print(f"  - {e}", file=sys.stderr)
    return EXIT_CONFIG


def _execute(scenario, out):
    from .scenarios import run_scenario

    try:
        summary = run_scenario(scenario, out)
    except (RadkinError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure in scenario {scenario.name!r}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summary["headline"])
    return EXIT_OK


def cmd_run(args):
    try:
        scenario = load_config(args.config, args.override)
    except ConfigError as exc:
        return _report_config_error(exc)
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(scenario, args.out)


def cmd_validate(args):
    try:
        scenario = load_config(args.config, args.override)
    except ConfigError as exc:
        return _report_config_error(exc)
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: scenario {scenario.name!r}")
    return EXIT_OK


def cmd_scan(args):
    doc = {
        "scenario": "dispersion-scan",
        "physics": {"taus": args.taus, "ks": args.ks},
        "background": {"kind": args.background, "v_th": args.v_th},
        "numerics": {"classify": not args.no_classify},
    }
    try:
        scenario = validate(doc)
    except ConfigError as exc:
        return _report_config_error(exc)
    return _execute(scenario, args.out)


def cmd_schema(args):
    print(describe_schema(args.scenario))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="radkin", description="Radiating-electron kinetics scenarios")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a TOML config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default runs/<scenario>)")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. physics.tau=1e-3 (repeatable)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("scan", help="dispersion roots over a (k, tau) grid")
    s.add_argument("--taus", type=float, nargs="+", default=[1e-4, 1e-3, 1e-2])
    s.add_argument("--ks", type=float, nargs="+", default=[0.0])
    s.add_argument("--background", choices=("cold", "maxwellian"), default="cold")
    s.add_argument("--v-th", type=float, default=1e-3)
    s.add_argument("--no-classify", action="store_true")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_scan)

    sc = sub.add_parser("schema", help="print the config schema")
    sc.add_argument("scenario", nargs="?", choices=SCENARIOS)
    sc.set_defaults(func=cmd_schema)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
