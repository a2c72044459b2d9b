"""Command-line entry point.

Exit codes: 0 all checks passed, 1 a physics or numerics check failed
(or an evolution hit a non-finite state), 2 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .harness import (
    csv_text,
    json_text,
    load_config,
    load_config_text,
    run_check_suite,
    run_evolution,
    run_observables,
    write_outputs,
)
from .inner_space import ConfigurationError
from .regulator import RegulatorParams, omega_integral, omega_oracle
from .suites import SUITES


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpdgauge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("omega", help="evaluate the regulated cone integral Omega_n")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--samples", type=int, default=10**7, help="Monte Carlo samples (0 to skip)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-12)

    p = sub.add_parser("check", help="run a named check suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--config", help="optional config file (seed, tolerance overrides)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--json", help="also write the JSON report here")

    for name, text in (("evolve", "integrate a configured initial state"),
                       ("observables", "observables of the configured initial state")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--stdout", action="store_true", help="print the CSV instead of writing files")

    sub.add_parser("version", help="print the package version")
    return parser


def _omega(args) -> int:
    params = RegulatorParams(scale=args.scale, tolerance=args.tolerance, seed=args.seed)
    value, err = omega_integral(args.n, params.tolerance)
    norm = (2 * 3.141592653589793) ** 3 * 4 ** (args.n + 2)
    out = {"n": args.n, "omega": value / norm, "quadrature_error": err / norm}
    if args.samples > 0:
        mc, se = omega_oracle(args.n, args.samples, seed=params.seed, scale=params.scale)
        out.update({"mc_estimate": mc, "mc_std_error": se, "mc_samples": args.samples})
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _check(args) -> int:
    if args.config:
        cfg = load_config(args.config, args.set)
    else:
        cfg = load_config_text("", args.set)
    report = run_check_suite(cfg, args.suite)
    for c in report.checks:
        print(c.line())
    print(f"suite {args.suite}: {'PASS' if report.passed else 'FAIL'}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(json_text(report, cfg))
    return 0 if report.passed else 1


def _run(args, runner) -> int:
    cfg = load_config(args.config, args.set)
    report = runner(cfg)
    if args.stdout:
        sys.stdout.write(csv_text(report))
    else:
        write_outputs(report, cfg)
    if report.status != "ok":
        print(f"evolution aborted: non-finite state after step "
              f"{report.summary['last_good_step']}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "omega":
            return _omega(args)
        if args.command == "check":
            return _check(args)
        if args.command == "evolve":
            return _run(args, run_evolution)
        if args.command == "observables":
            return _run(args, run_observables)
        print(__version__)
        return 0
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
