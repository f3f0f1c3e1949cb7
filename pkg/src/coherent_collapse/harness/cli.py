"""Command line interface.

Exit status: 0 when every audit passes (or is inconclusive), 1 on an audit
failure, 2 on a configuration or runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .presets import PRESETS, load_preset
from .runner import run

EXIT_OK, EXIT_AUDIT, EXIT_ERROR = 0, 1, 2


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--paths", type=int, help="override run.n_paths")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherent-collapse",
                                     description="Coherent-state reduction trajectory simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a configuration and write artifacts")
    _common(p)
    p.add_argument("--no-figures", action="store_true", help="skip SVG output")
    p = sub.add_parser("audit", help="run a configuration and report audit verdicts only")
    _common(p)
    p = sub.add_parser("repro", help="run a named preset")
    p.add_argument("preset", help="preset name (see list-presets)")
    _common(p, config=False)
    p.add_argument("--no-figures", action="store_true", help="skip SVG output")
    sub.add_parser("list-presets", help="list available presets")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command == "list-presets":
        for name, (desc, _) in PRESETS.items():
            print(f"{name:20s} {desc}")
        return EXIT_OK
    try:
        cfg = load_preset(args.preset) if args.command == "repro" else load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, n_paths=args.paths, out=args.out,
                                 workers=args.workers)
        out = None if args.command == "audit" else cfg.out
        if args.command == "repro" and out is None:
            out = f"runs/{cfg.name}"
        summary = run(cfg, out, figures=not getattr(args, "no_figures", False))
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RuntimeError, ValueError, FloatingPointError, OSError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "audit":
        for a in summary.audits:
            print(a.text())
        print(f"overall: {summary.verdict.upper()}")
    else:
        print(summary.text())
        if out is not None:
            print(f"artifacts written to {out}")
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())
