"""Command line entry points.

Subcommands map one-to-one onto the experiment drivers:

    dksim weak-error --config runs/weak.ini --out results/weak
    dksim structure  --config runs/structure.ini
    dksim comparison --config runs/comparison.ini
    dksim duality    --config runs/duality.ini
    dksim simulate   --config runs/single.ini --seed 7

Exit codes: 0 on success, 2 when the config is rejected (parse errors,
range violations, failed coercivity, under-resolved grids), 3 when a
trajectory blows up.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, load_config
from .experiments import (
    run_comparison,
    run_duality,
    run_simulate,
    run_structure,
    run_weak_error,
)
from .particles import ResolutionError
from .regularization import CoercivityViolation
from .solver import BlowUpError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3

_COMMANDS = (
    ("weak-error", "duality oracle vs Monte Carlo over a ladder of particle counts"),
    ("structure", "energy and entropy a-priori estimates over path ensembles"),
    ("comparison", "ordering of a coupled pair under one grid/step refinement"),
    ("duality", "evaluate the exact duality value once and exit"),
    ("simulate", "integrate a single trajectory and dump step diagnostics"),
)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dksim",
        description="Conservative square-root-noise SPDE experiments on the torus.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, blurb in _COMMANDS:
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="output directory (default: config out_dir)")
        p.add_argument(
            "--paths", type=int, default=None, help="override mc_paths for every row"
        )
        p.add_argument(
            "--threads", type=int, default=None, help="override the FFT worker count"
        )
        p.add_argument(
            "--progress", action="store_true", help="stream per-row progress to stderr"
        )
    return ap


def _apply_overrides(cfg, args):
    repl = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        repl["master_seed"] = args.seed
    if args.paths is not None:
        if args.paths < 100:
            raise ConfigError(f"--paths must be >= 100, got {args.paths}")
        repl["mc_paths"] = (args.paths,)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        repl["workers"] = args.threads
    if args.out is not None:
        repl["out_dir"] = args.out
    return dataclasses.replace(cfg, **repl) if repl else cfg


def _print_weak_error(report) -> None:
    print(f"weak-error study: phi = {report.test_function}, T = {report.horizon}")
    print(
        f"{'N':>6} {'delta':>10} {'M':>3} {'duality':>14} {'spde_mc':>14} "
        f"{'se':>9} {'|err|':>10} {'|err_gauss|':>11}"
    )
    for r in report.rows:
        print(
            f"{r.n_particles:>6} {r.delta:>10.4g} {r.cutoff:>3} {r.duality_value:>14.8f} "
            f"{r.spde_mc_mean:>14.8f} {r.spde_mc_se:>9.2e} {r.abs_error_spde:>10.3e} "
            f"{r.abs_error_gaussian:>11.3e}"
        )
    for label, fit in (("spde", report.fit_spde), ("gaussian", report.fit_gaussian)):
        if fit is None:
            print(f"slope[{label}]: no fit (fewer than 2 resolved rows)")
        else:
            print(
                f"slope[{label}]: {fit.slope:.3f}  "
                f"95% CI [{fit.ci_lo:.3f}, {fit.ci_hi:.3f}]  "
                f"(rows used: {list(fit.used_n)})"
            )


def _print_structure(report) -> None:
    print(f"structure suite: T = {report.horizon}")
    for r in report.rows:
        verdict = "ok" if r.energy_ok else "VIOLATED"
        print(
            f"  N={r.n_particles:<5} energy {verdict}: lhs {r.energy_lhs:.6f} "
            f"<= rhs {r.energy_rhs:.6f} + slack {r.energy_slack:.2e} + 3se {3 * r.energy_se:.2e}"
        )
        print(
            f"  N={r.n_particles:<5} entropy fitted_c = {r.fitted_c:.4f} "
            f"(lhs {r.entropy_lhs:.4f}, base rhs {r.entropy_rhs_base:.4f})"
        )


def _print_comparison(report) -> None:
    print(f"comparison runs: T = {report.horizon}")
    for r in report.rows:
        status = "ok" if r.violation_max <= r.threshold else "ABOVE THRESHOLD"
        print(
            f"  level {r.level} (n={r.grid_n}, dt={r.dt:.3e}): "
            f"max violation {r.violation_max:.3e} vs threshold {r.threshold:.3e} [{status}]"
        )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind is not None and cfg.kind != args.command:
            raise ConfigError(
                f"config declares kind = {cfg.kind!r} but subcommand is {args.command!r}"
            )
        cfg = _apply_overrides(cfg, args)
        out = cfg.out_dir
        if args.command == "weak-error":
            report = run_weak_error(cfg, out_dir=out, progress=args.progress)
            _print_weak_error(report)
        elif args.command == "structure":
            report = run_structure(cfg, out_dir=out, progress=args.progress)
            _print_structure(report)
        elif args.command == "comparison":
            report = run_comparison(cfg, out_dir=out, progress=args.progress)
            _print_comparison(report)
        elif args.command == "duality":
            result = run_duality(cfg, out_dir=out)
            print(f"duality value: {result['duality_value']:.12f}")
            print(f"  (N={result['n_particles']}, T={result['horizon']}, phi={result['test_function']})")
        else:
            records = run_simulate(cfg, out_dir=out)
            last = records[-1]
            print(
                f"simulated 1 path to t = {last.t:.6f}: mass {last.mass:.12f}, "
                f"energy {last.energy:.6f}, min {last.min_value:.3e}"
            )
        print(f"reports written to {out}", file=sys.stderr)
    except (ConfigError, CoercivityViolation, ResolutionError) as exc:
        print(f"dksim: config rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"dksim: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
