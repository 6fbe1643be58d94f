"""Parameter sweeps: a grid of independent simulations with one summary row
per point.

Axes move either a model coefficient (chi2, r, lambda) or an initial
population average (ubar0, vbar0, realized by rescaling that field's initial
profile to the target mean).  Points are pure functions of the base config
plus overrides, so they can run in any order or in parallel without changing
the report; the worker count comes from FORAGERSIM_SWEEP_WORKERS.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product

from .config import SimConfig, SweepSpec
from .diagnostics import fit_decay_rate, tail_slice
from .model import RescaledToMean, stability_margin
from .stepping import TERMINATION_STEADY, run_simulation

WORKERS_ENV = "FORAGERSIM_SWEEP_WORKERS"

SWEEP_HEADER_FIXED = (
    "margin,normalized,converged,termination,fitted_alpha,fit_r_squared,"
    "final_dev_u,final_dev_v,final_dev_w,b_feasible_tail"
)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    overrides: tuple[tuple[str, float], ...]


@dataclass
class PointSummary:
    point: SweepPoint
    margin: float | None
    normalized: bool | None
    converged: bool
    termination: str
    fitted_alpha: float | None
    fit_r_squared: float | None
    final_dev_u: float | None
    final_dev_v: float | None
    final_dev_w: float | None
    b_feasible_tail: bool | None


def enumerate_points(spec: SweepSpec) -> list[SweepPoint]:
    grids = [[(name, v) for v in values] for name, values in spec.axes]
    return [
        SweepPoint(index=i, overrides=tuple(combo))
        for i, combo in enumerate(product(*grids))
    ]


def apply_overrides(base: SimConfig, overrides: tuple[tuple[str, float], ...]) -> SimConfig:
    cfg = base
    for name, value in overrides:
        if name == "chi2":
            cfg = replace(cfg, params=replace(cfg.params, chi2=value))
        elif name == "r":
            cfg = replace(cfg, params=replace(cfg.params, r=value))
        elif name == "lambda":
            cfg = replace(cfg, params=replace(cfg.params, lam=value))
        elif name == "ubar0":
            cfg = replace(cfg, init=replace(cfg.init, u=RescaledToMean(cfg.init.u, value)))
        elif name == "vbar0":
            cfg = replace(cfg, init=replace(cfg.init, v=RescaledToMean(cfg.init.v, value)))
        else:
            raise ValueError(f"unknown sweep axis {name!r}")
    return cfg


def run_point(base: SimConfig, point: SweepPoint) -> PointSummary:
    cfg = apply_overrides(base, point.overrides)
    trajectory = run_simulation(cfg.init, cfg.params, cfg.grid, cfg.control, cfg.energy)
    eq = trajectory.equilibrium

    margin = normalized = None
    try:
        margin, normalized = stability_margin(cfg.params, eq.ubar0, eq.vbar0, cfg.grid)
    except ValueError:
        pass

    fitted_alpha = fit_r2 = None
    recs = trajectory.records
    times = [rec.t for rec in recs]
    values = [rec.linf_dev_u for rec in recs]
    # widen to (nearly) the whole series when the configured tail holds
    # fewer than the minimum fit points, as happens for fast convergers
    for tail in (cfg.energy.tail_fraction, 0.999):
        try:
            fit = fit_decay_rate(times, values, tail)
        except ValueError:
            continue
        fitted_alpha, fit_r2 = fit.alpha, fit.r_squared
        break

    b_feasible_tail = None
    if recs:
        mask = tail_slice([rec.t for rec in recs], cfg.energy.tail_fraction)
        b_feasible_tail = all(rec.b_feasible for rec, keep in zip(recs, mask) if keep)

    final = recs[-1] if recs else None
    return PointSummary(
        point=point,
        margin=margin,
        normalized=normalized,
        converged=trajectory.termination == TERMINATION_STEADY,
        termination=trajectory.termination,
        fitted_alpha=fitted_alpha,
        fit_r_squared=fit_r2,
        final_dev_u=final.linf_dev_u if final else None,
        final_dev_v=final.linf_dev_v if final else None,
        final_dev_w=final.linf_dev_w if final else None,
        b_feasible_tail=b_feasible_tail,
    )


def _run_point_args(args) -> PointSummary:
    base, point = args
    return run_point(base, point)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from exc
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {workers}")
    return workers


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[PointSummary]:
    """Run every grid point; identical results whether serial or parallel."""
    if workers is None:
        workers = worker_count()
    points = enumerate_points(spec)
    jobs = [(spec.base, p) for p in points]
    if workers <= 1 or len(points) <= 1:
        return [_run_point_args(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point_args, jobs))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_sweep_report(
    spec: SweepSpec, results: list[PointSummary], out_dir: str
) -> str:
    """CSV with the axis values and the per-point summary fields."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    axis_names = [name for name, _ in spec.axes]
    header = "point," + ",".join(axis_names) + "," + SWEEP_HEADER_FIXED
    lines = [header]
    for res in results:
        axis_values = dict(res.point.overrides)
        row = [str(res.point.index)]
        row += [_cell(axis_values[name]) for name in axis_names]
        row += [
            _cell(res.margin),
            _cell(res.normalized),
            _cell(res.converged),
            res.termination,
            _cell(res.fitted_alpha),
            _cell(res.fit_r_squared),
            _cell(res.final_dev_u),
            _cell(res.final_dev_v),
            _cell(res.final_dev_w),
            _cell(res.b_feasible_tail),
        ]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
