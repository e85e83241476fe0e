"""Command-line entry point: ``urllc --experiment NAME [--seed S] [--out PATH]``."""
from __future__ import annotations

import argparse
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import UrllcError
from .experiments import DEFAULT_SEED, ExperimentConfig, UsageError, list_experiments, run


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="urllc", description="Reproduce URLLC analyses as CSV.")
    ap.add_argument("--experiment", help="experiment name (see --list)")
    ap.add_argument("--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED})")
    ap.add_argument("--out", help="write the CSV here instead of standard output")
    ap.add_argument("--config", help="TOML file of flat key = value parameters")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one parameter (repeatable)")
    ap.add_argument("--list", action="store_true", help="list experiments and exit")
    return ap


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if any(isinstance(v, (dict, list)) for v in data.values()):
        raise UsageError("config values must be flat scalars")
    return data


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.list:
        for name, what in list_experiments():
            print(f"{name}\t{what}")
        return 0
    try:
        if not args.experiment:
            raise UsageError("--experiment is required")
        params = _load_config(args.config) if args.config else {}
        seed = params.pop("seed", DEFAULT_SEED)
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            params[key.strip()] = value.strip()
        if args.seed is not None:
            seed = args.seed
        cfg = ExperimentConfig(args.experiment, params, int(seed), args.out)
        table = run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except UrllcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not args.out:
        sys.stdout.write(table.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
