"""Command-line entry point: ``longwave run | verify | list``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig


def _parse_overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError("override must look like section.key=value", item)
        out[key.strip()] = value.strip()
    return out


def _resolve_config(path: str) -> Path | str:
    """A file path, or the bare name of a shipped config (with or without .ini)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name[:-4] if p.name.endswith(".ini") else p.name
    if p.parent == Path(".") and name in harness.shipped_configs():
        return name
    return p


def _load(path: str, overrides: dict[str, str]) -> ExperimentConfig:
    target = _resolve_config(path)
    if isinstance(target, str):
        return ExperimentConfig.default(target, overrides)
    return ExperimentConfig.load(target, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longwave", description="Long-wave Vlasov-Poisson numerics and convergence experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="INI file or name of a shipped config (e.g. kdv_sweep.ini)")
    run.add_argument("overrides", nargs="*", help="section.key=value overrides")
    run.add_argument("--out", help="output directory (default: the config's output.dir)")
    run.add_argument("--threads", type=int, help="parallel eps jobs (LONGWAVE_THREADS takes precedence)")
    run.add_argument("--dry-run", action="store_true", help="validate and print the plan without running or writing")

    verify = sub.add_parser("verify", help="run a property suite")
    verify.add_argument("suite", nargs="?", default="all", help="suite name or 'all'")

    sub.add_parser("list", help="list experiments and shipped configs")
    return parser


def _cmd_list() -> int:
    print("experiments:")
    for name in harness.EXPERIMENTS:
        print(f"  {name}")
    print("shipped configs:")
    for name, fname in harness.shipped_configs().items():
        print(f"  {fname}")
    return 0


def _cmd_run(args) -> int:
    overrides = _parse_overrides(args.overrides)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("must be at least 1", "--threads")
        overrides.setdefault("run.threads", str(args.threads))
    cfg = _load(args.config, overrides)
    if args.dry_run:
        print(cfg.plan())
        return 0
    out = Path(args.out) if args.out else Path(cfg.get("output", "dir"))
    _, criteria = harness.run_experiment(cfg, out)
    for c in criteria:
        print(c.line())
    print(f"outputs in {out}")
    return 0 if all(c.passed for c in criteria) else 1


def _cmd_verify(args) -> int:
    from .verify import run_suite

    try:
        results = run_suite(args.suite)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    for label, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    # overrides may follow options, so leftovers of ``run`` are treated as more overrides
    args, extra = parser.parse_known_args(argv)
    if extra and args.command != "run":
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if extra:
        args.overrides = list(args.overrides) + extra
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_run(args)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if exc.key else ""
        print(f"error: {str(exc).split(' [')[0]}{key}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
