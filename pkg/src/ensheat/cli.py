"""Command line entry point.

Subcommands: ``converge``, ``stability``, ``timing``, ``run``.  Options may
come from ``--config <file>`` (flat key=value, same keys as the flags) with
command-line flags taking precedence.  Exit codes: 0 success, 1
configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .assembly import CoefficientPositivityError
from .experiments import (
    ConfigError,
    RunConfig,
    load_config,
    run_convergence_study,
    run_single,
    run_stability_study,
    run_timing_study,
)
from .sparse import NotSpdError
from .stepping import NumericalFailure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensheat",
        description="Ensemble steppers for the coupled two-domain heat problem",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, blurb in (
        ("converge", "mesh-refinement error study on the smooth problem"),
        ("stability", "zero-forcing energy decay across time step sizes"),
        ("timing", "shared-matrix wall-time comparison against the baseline"),
        ("run", "single run with per-step diagnostics"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--algo", help="a1 | a2 | a3 | baseline | all")
        p.add_argument("--mesh", help="comma list of cells per unit length, e.g. 4,8,16,32")
        p.add_argument("--dt", help="time step, or comma list for stability sweeps")
        p.add_argument("--T", help="final time")
        p.add_argument("--J", help="samples per random axis")
        p.add_argument("--seed", help="random seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--solver", help="cholesky | cg")
        p.add_argument("--sizes", help="timing ensemble sizes, e.g. 1,5,10")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(experiment=args.experiment)
    if args.config:
        cfg = load_config(args.config, base=cfg)
        cfg = replace(cfg, experiment=args.experiment)
    overrides = {}
    if args.algo is not None:
        overrides["algo"] = args.algo
    if args.mesh is not None:
        overrides["mesh"] = tuple(int(v) for v in args.mesh.split(",") if v.strip())
    if args.dt is not None:
        overrides["dt"] = tuple(float(v) for v in args.dt.split(",") if v.strip())
    if args.T is not None:
        overrides["T"] = float(args.T)
    if args.J is not None:
        overrides["J"] = int(args.J)
    if args.seed is not None:
        overrides["seed"] = int(args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    if args.solver is not None:
        overrides["solver"] = args.solver
    if args.sizes is not None:
        overrides["sizes"] = tuple(int(v) for v in args.sizes.split(",") if v.strip())
    try:
        cfg = replace(cfg, **overrides)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.algo not in ("a1", "a2", "a3", "baseline", "all"):
        raise ConfigError(f"unknown algorithm {cfg.algo!r}")
    if cfg.solver not in ("cholesky", "cg"):
        raise ConfigError(f"unknown solver {cfg.solver!r}")
    if any(n < 1 for n in cfg.mesh):
        raise ConfigError(f"mesh sizes must be positive, got {cfg.mesh}")
    if cfg.dt is not None and any(dt <= 0 for dt in cfg.dt):
        raise ConfigError(f"time steps must be positive, got {cfg.dt}")
    if cfg.J < 1:
        raise ConfigError(f"J must be >= 1, got {cfg.J}")


def cli_main(argv=None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse prints usage to stderr itself; remap its exit code so
        # flag errors are configuration errors.
        return EXIT_OK if e.code == 0 else EXIT_CONFIG

    try:
        cfg = _config_from_args(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.experiment == "converge":
            run_convergence_study(cfg)
        elif cfg.experiment == "stability":
            run_stability_study(cfg)
        elif cfg.experiment == "timing":
            run_timing_study(cfg)
        else:
            run_single(cfg)
    except (NumericalFailure, NotSpdError, CoefficientPositivityError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
