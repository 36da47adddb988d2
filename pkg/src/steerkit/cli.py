"""Command-line entry point.

Subcommands: run/sweep/scale/fig1 each take a JSON config file (the kind-
specific subcommands assert the config's experiment kind matches); verify
runs the self-check suite and prints a pass/fail table. Errors exit with a
distinct code per failure class (2 parse, 3 validation, 4 IO) and a
machine-readable JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .harness import (
    EXIT_IO,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_VALIDATION,
    ConfigParseError,
    ConfigValidationError,
    load_config,
    run_from_config,
)
from .verification import run_verification_suite

_KIND_BY_COMMAND = {
    "run": None,  # any experiment kind
    "fig1": "synthetic_fig1",
    "sweep": "lr_sweep",
    "scale": "step_scaling",
}


def _error_record(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _add_config_command(sub, name: str, help_text: str) -> None:
    p = sub.add_parser(name, help=help_text)
    p.add_argument("config", help="path to a JSON experiment config")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument(
        "--seeds",
        help="override seeds: comma-separated integers, e.g. 0,1,2",
    )
    p.add_argument("--jobs", type=int, help="worker processes for sweep rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steerkit",
        description="inference-time steering experiments over analytic denoisers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_command(sub, "run", "run any experiment config")
    _add_config_command(sub, "fig1", "synthetic histogram panels")
    _add_config_command(sub, "sweep", "learning-rate sweep on a toy task")
    _add_config_command(sub, "scale", "step-count scaling table")
    sub.add_parser("verify", help="run the verification suite, print a table")
    return parser


def _parse_seeds(text: str) -> Sequence[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as e:
        raise ConfigValidationError(f"bad --seeds value: {e}") from e


def _run_config_command(args) -> int:
    try:
        cfg = load_config(args.config)
        expected = _KIND_BY_COMMAND[args.command]
        if expected is not None and cfg.experiment != expected:
            raise ConfigValidationError(
                f"'{args.command}' needs a {expected!r} config, got {cfg.experiment!r}"
            )
        cfg = cfg.with_overrides(
            out_dir=args.out,
            seeds=None if args.seeds is None else _parse_seeds(args.seeds),
            jobs=args.jobs,
        )
        manifest = run_from_config(cfg)
    except ConfigParseError as e:
        _error_record("parse", str(e))
        return EXIT_PARSE
    except ConfigValidationError as e:
        _error_record("validation", str(e))
        return EXIT_VALIDATION
    except OSError as e:
        _error_record("io", str(e))
        return EXIT_IO
    print(f"wrote {cfg.out_dir} ({cfg.experiment}, wall {manifest['wall_time_s']:.2f}s)")
    return EXIT_OK


def _run_verify() -> int:
    results = run_verification_suite()
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        if not r.passed:
            failed += 1
        print(f"{status}  {r.name:<{width}}  {r.detail}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _run_verify()
    return _run_config_command(args)


if __name__ == "__main__":
    sys.exit(main())
