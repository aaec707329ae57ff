"""Command line entry point: ``bpc run | verify | sweep``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from bpc import config as cfgmod
from bpc import harness
from bpc.verification import SUITES


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR", help="output root (overrides BPC_OUT and [output] dir)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker processes for sweeps (default 1)")
    p.add_argument("--seed", type=int, default=None, metavar="N",
                   help="seed for random initial data (overrides [fluid] seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpc", description=(
        "Viscous Burgers fluid with a moving point particle: simulation, "
        "control strategy and verification suites."))
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario(s) in a config file")
    run.add_argument("config", help="INI scenario file")
    _common(run)
    sweep = sub.add_parser("sweep", help="run a config with list-valued keys in a worker pool")
    sweep.add_argument("config", help="INI scenario file")
    _common(sweep)
    ver = sub.add_parser("verify", help="run a refinement ladder or property suite")
    ver.add_argument("suite", choices=sorted(SUITES))
    _common(ver)
    return parser


def _scenarios(args):
    try:
        return cfgmod.load(args.config, seed=args.seed), None
    except cfgmod.ConfigError as exc:
        return None, str(exc)


def _cmd_run(args, pooled: bool) -> int:
    scenarios, err = _scenarios(args)
    if err:
        print(f"error: {err}", file=sys.stderr)
        return harness.EXIT_ERROR
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return harness.EXIT_ERROR
    root = harness.output_root(args.out, scenarios[0].output.dir)
    outcomes = harness.run_all(scenarios, root, threads=args.threads if pooled else 1)
    for o in outcomes:
        stream = sys.stderr if o.status == harness.EXIT_ERROR else sys.stdout
        print(f"{o.name}: {o.message}", file=stream)
    status = harness.overall_status(outcomes)
    print(f"{len(outcomes)} run(s) written under {root}; exit {status}")
    return status


def _cmd_verify(args) -> int:
    result = SUITES[args.suite]()
    root = Path(harness.output_root(args.out, None))
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"verify_{args.suite}.csv"
    harness.write_check(path, result)
    print(result.line())
    print(f"table written to {path} ({result.seconds:.1f} s)")
    return harness.EXIT_OK if result.passed else harness.EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    return _cmd_run(args, pooled=args.command == "sweep")


if __name__ == "__main__":
    sys.exit(main())
