"""Command-line entry point for the experiment runner.

Subcommands mirror the studies: ``sim1`` (constant sweep), ``sim2``
(method comparison), ``sim3`` (covariate shift), ``realdata``, plus
``dump-spectral`` and ``bias-variance`` for diagnostic tables.

Exit codes: 0 success, 2 configuration problem, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, NumericError
from .runner import (
    ExperimentConfig,
    bias_variance_experiment,
    dump_spectral_tables,
    run_experiment,
    write_output,
)

_SUBCOMMAND_EXPERIMENT = {
    "sim1": "sim1_constant_sweep",
    "sim2": "sim2_method_comparison",
    "sim3": "sim3_covariate_shift",
    "realdata": "realdata",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgdselect",
        description="kernel gradient descent with adaptive iteration selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sim1", "sim2", "sim3", "realdata", "dump-spectral", "bias-variance"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file", default=None)
        p.add_argument("--out", help="output directory", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
    return parser


def _load_config(args, experiment: str | None) -> ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = {}
    if experiment is not None:
        raw["experiment"] = experiment
    cfg = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in _SUBCOMMAND_EXPERIMENT:
            cfg = _load_config(args, _SUBCOMMAND_EXPERIMENT[args.command])
            out = run_experiment(cfg)
            paths = write_output(out, args.out)
            for p in paths:
                print(f"wrote {p}")
        elif args.command == "dump-spectral":
            cfg = _load_config(args, None)
            path = dump_spectral_tables(cfg, args.out)
            print(f"wrote {path}")
        else:  # bias-variance
            cfg = _load_config(args, None)
            path = bias_variance_experiment(cfg, args.out)
            print(f"wrote {path}")
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # invalid arguments surfaced by the numerics (e.g. an inadmissible
        # step size) trace back to the configuration
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
