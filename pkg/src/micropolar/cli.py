"""Command-line entry point: ``micropolar {run,sweep,verify,convergence,resume}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, suite
from .config import ConfigError, RunConfig, help_text, load_config, parse_assignments


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="configuration file (key = value lines)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; repeatable")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="initial-data seed (overrides init.seed)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps and verify")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micropolar",
        description="Pseudo-spectral micropolar Rayleigh-Benard simulator on the periodic torus [0, 2pi)^2.")
    parser.add_argument("--help-config", action="store_true", help="print the configuration schema and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", help="integrate one trajectory and write a run directory")
    _common(p)

    p = sub.add_parser("resume", help="continue a run from a checkpoint")
    p.add_argument("checkpoint", help="checkpoint file inside a run directory")
    _common(p)

    p = sub.add_parser("sweep", help="one run per value of a configuration key")
    p.add_argument("--axis", required=True, help="dotted configuration key, e.g. params.beta")
    p.add_argument("--values", required=True, help="comma-separated values")
    _common(p)

    p = sub.add_parser("verify", help="run acceptance checks and write a JSONL report")
    p.add_argument("selector", nargs="?", default="all",
                   help="trivial, lemmas, solver, trajectories, all, or criterion-N")
    _common(p)

    p = sub.add_parser("convergence", help="temporal order and spatial error report")
    p.add_argument("--t-end", type=float, help="integration time for the order study (default min(T, 0.5))")
    _common(p)
    return parser


def load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = parse_assignments(args.overrides)
    if args.seed is not None:
        overrides["init.seed"] = str(args.seed)
    if args.out is not None:
        overrides["output.dir"] = args.out
    return config.with_overrides(overrides)


def _print_run(res: harness.RunResult) -> None:
    print(f"{res.status}: t={res.t_final:g} dir={res.directory}")
    if res.message:
        print(res.message)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.help_config:
        sys.stdout.write(help_text())
        return 0
    if args.command is None:
        parser.print_help()
        return 1
    try:
        if args.command == "resume" and not args.config:
            base = load_config(Path(args.checkpoint).parent / "config.txt")
            config = base.with_overrides(parse_assignments(args.overrides))
            res = harness.resume(args.checkpoint, config, args.out)
            _print_run(res)
            return res.exit_code
        config = load(args)
        if args.command == "run":
            res = harness.run(config)
            _print_run(res)
            return res.exit_code
        if args.command == "resume":
            res = harness.resume(args.checkpoint, config, args.out)
            _print_run(res)
            return res.exit_code
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            plan = harness.SweepPlan(config, args.axis, tuple(values), harness.worker_count(args.workers))
            rows = harness.sweep(plan)
            for row in rows:
                print(f"{args.axis}={row['value']}: {row['status']} c={row['c_energy_with_dissipation']}")
            return max(row["exit_code"] for row in rows)
        if args.command == "verify":
            out = Path(args.out or config.out_dir) / "verify.jsonl"
            results, code = suite.verify(args.selector, out, harness.worker_count(args.workers))
            for r in results:
                print(r.line())
            print(f"report: {out}")
            return code
        if args.command == "convergence":
            report = harness.convergence(config, args.t_end)
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "convergence.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_ERROR
    return 1


if __name__ == "__main__":
    sys.exit(main())
