"""Command-line entry points.

Subcommands: ``simulate`` (run one configuration and write its reports),
``stability`` (evaluate the homogenization margin for a configuration),
``sweep`` (grid of simulations with a CSV report), and ``verify-lemmas``
(randomized differential-inequality bound verification).

Exit codes: 0 success, 1 validation/configuration error, 2 runtime invariant
violation, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config, parse_sweep
from .diagnostics import fit_decay_rate
from .model import init_state, mass_and_mean, stability_margin
from .odebounds import verification_suite
from .reporting import MarginInfo, write_snapshot, write_summary, write_timeseries
from .stepping import TERMINATION_ERROR, run_simulation
from .sweep import WORKERS_ENV, run_sweep, write_sweep_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_IO = 3


def _read_text(path: str) -> str:
    with open(path, "r") as fh:
        return fh.read()


def _initial_means(cfg):
    state = init_state(cfg.init, cfg.grid)
    _, ubar0 = mass_and_mean(state.u, cfg.grid)
    _, vbar0 = mass_and_mean(state.v, cfg.grid)
    return ubar0, vbar0


def _cmd_simulate(args) -> int:
    cfg = parse_config(_read_text(args.config))
    trajectory = run_simulation(cfg.init, cfg.params, cfg.grid, cfg.control, cfg.energy)

    margin = None
    try:
        m, normalized = stability_margin(
            cfg.params, trajectory.equilibrium.ubar0, trajectory.equilibrium.vbar0, cfg.grid
        )
        margin = MarginInfo(margin=m, normalized=normalized)
    except ValueError:
        pass

    fit = None
    try:
        fit = fit_decay_rate(
            [rec.t for rec in trajectory.records],
            [rec.linf_dev_u for rec in trajectory.records],
            cfg.energy.tail_fraction,
        )
    except ValueError:
        pass

    ts_path = write_timeseries(trajectory, cfg.output_dir)
    summary_path = write_summary(
        trajectory,
        cfg.params,
        fit,
        trajectory.equilibrium,
        margin,
        cfg.energy.tail_fraction,
        cfg.output_dir,
    )
    if cfg.write_snapshots:
        for state in trajectory.snapshots:
            write_snapshot(state, cfg.grid, cfg.output_dir)

    print(f"wrote {ts_path}")
    print(f"wrote {summary_path}")
    if trajectory.termination == TERMINATION_ERROR:
        print(f"simulation aborted: {trajectory.error_message}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"termination: {trajectory.termination} at t={trajectory.final_state.t!r}")
    return EXIT_OK


def _cmd_stability(args) -> int:
    cfg = parse_config(_read_text(args.config))
    try:
        ubar0, vbar0 = _initial_means(cfg)
        margin, normalized = stability_margin(cfg.params, ubar0, vbar0, cfg.grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"margin = {margin!r}")
    print(f"normalized = {'true' if normalized else 'false'}")
    print("prediction: " + ("homogenization" if margin > 0 else "no homogenization predicted"))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if args.workers is not None and args.workers < 1:
        raise ConfigError(f"--workers must be a positive integer, got {args.workers}")
    spec = parse_sweep(_read_text(args.sweepspec))
    results = run_sweep(spec, workers=args.workers)
    path = write_sweep_report(spec, results, spec.base.output_dir)
    converged = sum(1 for r in results if r.converged)
    print(f"wrote {path}")
    print(f"{converged}/{len(results)} points converged")
    return EXIT_OK


def _cmd_verify_lemmas(args) -> int:
    result = verification_suite(
        instances_per_kind=args.instances, samples=args.samples, seed=args.seed
    )
    for family, (checks, worst, t_at) in sorted(result.family_summary().items()):
        print(f"{family}: {checks} checks, max scaled excess {worst!r} at t={t_at!r}")
    if not result.passed:
        print("bound violation detected", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"all {len(result.reports)} instances within bounds")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foragersim",
        description="1D forager-exploiter chemotaxis simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration and write reports")
    p.add_argument("config", help="path to a TOML simulation config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stability", help="evaluate the homogenization margin")
    p.add_argument("config", help="path to a TOML simulation config")
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("sweepspec", help="path to a TOML sweep spec")
    p.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"parallel worker processes (default: {WORKERS_ENV} or 1)",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify-lemmas", help="verify the comparison bounds on random instances")
    p.add_argument("--samples", type=int, default=1000, help="minimum check points per instance")
    p.add_argument("--instances", type=int, default=500, help="random instances per hypothesis")
    p.add_argument("--seed", type=int, default=0, help="randomization seed")
    p.set_defaults(func=_cmd_verify_lemmas)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli())
