"""Command line entry point: ``nds run``, ``nds verify``, ``nds constants``.

Exit codes: 0 success, 1 configuration error, 2 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiment import ConfigError, constants, load_config, run, verify, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run(cfg)
    paths = write_outputs(result, cfg, args.out)
    status = "passed" if result.passed else "FAILED"
    print(f"{cfg.scenario}: acceptance {status}; wrote {paths['csv']} and {paths['json']}")
    if "error" in result.report:
        print(result.report["error"], file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAILED


def _cmd_verify(args) -> int:
    results = verify(args.seed, args.epsilon)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} invariants hold")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def _cmd_constants(args) -> int:
    print(json.dumps(constants(load_config(args.config)), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write CSV/JSON reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=0, help="fuzz seed")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="noise amplitude to check (values >= 1/8 are expected to fail)")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("constants", help="print predicted constants for a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_constants)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
