"""``tempered-ot`` command line: experiment sweeps writing CSV/JSON data."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DomainError
from .experiments import (COMMANDS, EXIT_BAD_CONFIG, ConfigError, config_fields, default_config,
                          exit_code, rows_to_csv, run_sparsity_map, run_trials, sparsity_text)

log = logging.getLogger("tempered_ot")

# flag dest -> ExperimentConfig field
_FLAG_FIELDS = {"n": "n", "trials": "trials", "seed": "master_seed", "t": "t_grid",
                "lam": "lambda_grid", "variant": "variant", "tol": "tol",
                "max_iter": "max_iter", "out": "output_path", "threshold": "threshold"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempered-ot",
                                     description="Tempered optimal transport experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--n", type=int, help="problem size")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help="master seed; trial k uses (seed, k)")
        p.add_argument("--t", type=float, nargs="+", help="temperature grid")
        p.add_argument("--lambda", dest="lam", type=float, nargs="+", help="regularization grid")
        p.add_argument("--variant", choices=["expected", "measured", "both"])
        p.add_argument("--tol", type=float, help="Sinkhorn tolerance on the xi change")
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--threshold", type=float, help="support threshold (sparsity-map)")
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    return parser


def resolve_config(args: argparse.Namespace):
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = default_config(args.command)
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        unknown = set(data) - config_fields()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.pop("command", None)
        cfg = replace(cfg, **data)
    overrides = {field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()
                 if getattr(args, flag) is not None}
    return replace(cfg, **overrides).validate()


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, DomainError, OSError, TypeError, ValueError) as exc:
        print(f"tempered-ot: bad configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    log.info("running %s", cfg.to_json())
    try:
        if cfg.command == "sparsity-map":
            doc, flags = run_sparsity_map(cfg)
            _emit(json.dumps(doc, indent=1) + "\n", cfg.output_path)
            if cfg.output_path is not None:
                Path(cfg.output_path).with_suffix(".txt").write_text(sparsity_text(doc))
        else:
            rows, flags = run_trials(cfg)
            _emit(rows_to_csv(cfg.command, rows), cfg.output_path)
    except ConfigError as exc:
        print(f"tempered-ot: bad configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return exit_code(flags)


if __name__ == "__main__":
    sys.exit(main())
