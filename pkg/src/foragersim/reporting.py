"""Serialization of trajectories: time-series CSV, run summary JSON, and
field snapshots.

All numbers go out as shortest round-tripping decimal (Python ``repr``), so
files are bit-reproducible across runs of the same build and lose nothing to
formatting.  Boolean columns are written as 1/0.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    DecayFit,
    DiagnosticsRecord,
    fit_decay_rate,
    tail_slice,
    w_sup_bound,
)
from .model import EquilibriumInfo, FieldState, Grid, ModelParams
from .stepping import TERMINATION_STEADY, Trajectory

TIMESERIES_HEADER = (
    "t,mass_u,mass_v,min_u,max_u,min_v,max_v,min_w,max_w,"
    "linf_dev_u,linf_dev_v,linf_dev_w,l1_dev_u,l1_dev_v,kl_u,kl_v,"
    "grad_l2_u,grad_l2_v,grad_l2_w,F,D,b_used,b_feasible,w_bound_slack"
)

SNAPSHOT_HEADER = "x,u,v,w"

# relative drift beyond which a record counts as a mass-conservation violation
MASS_DRIFT_TOL = 1e-10
# scaled tolerance for the nutrient sup-bound slack
W_BOUND_TOL = 1e-8
# scaled tolerance for Csiszar-Kullback slack
CK_TOL = 1e-12


def _cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    return repr(float(value))


def _record_row(rec: DiagnosticsRecord) -> str:
    return ",".join(
        _cell(v)
        for v in (
            rec.t, rec.mass_u, rec.mass_v, rec.min_u, rec.max_u, rec.min_v, rec.max_v,
            rec.min_w, rec.max_w, rec.linf_dev_u, rec.linf_dev_v, rec.linf_dev_w,
            rec.l1_dev_u, rec.l1_dev_v, rec.kl_u, rec.kl_v,
            rec.grad_l2_u, rec.grad_l2_v, rec.grad_l2_w,
            rec.energy, rec.dissipation, rec.b_used, rec.b_feasible, rec.w_bound_slack,
        )
    )


def write_timeseries(trajectory: Trajectory, out_dir: str) -> str:
    """Write one CSV row per diagnostics record; header-only when empty."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "timeseries.csv")
    lines = [TIMESERIES_HEADER]
    lines += [_record_row(rec) for rec in trajectory.records]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_snapshot(state: FieldState, grid: Grid, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"snapshot_{state.t:.6f}.csv")
    x = grid.cell_centers()
    lines = [SNAPSHOT_HEADER]
    lines += [
        f"{_cell(x[i])},{_cell(state.u[i])},{_cell(state.v[i])},{_cell(state.w[i])}"
        for i in range(grid.n)
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


@dataclass
class MarginInfo:
    margin: float
    normalized: bool


def count_violations(
    trajectory: Trajectory, params: ModelParams
) -> dict[str, int]:
    """Per-invariant violation counts over the records: mass drift beyond
    1e-10 relative, negative sup-bound slack beyond its scaled tolerance,
    positivity breaches, and negative entropies/energies beyond roundoff."""
    recs = trajectory.records
    counts = {
        "mass_drift_u": 0,
        "mass_drift_v": 0,
        "w_bound": 0,
        "positivity": 0,
        "kl_negative": 0,
        "energy_negative": 0,
    }
    if not recs:
        return counts
    scale_w = w_sup_bound(params, trajectory.w0_max, 0.0)
    mass_u0, mass_v0 = recs[0].mass_u, recs[0].mass_v
    for rec in recs:
        if abs(rec.mass_u - mass_u0) > MASS_DRIFT_TOL * abs(mass_u0):
            counts["mass_drift_u"] += 1
        if abs(rec.mass_v - mass_v0) > MASS_DRIFT_TOL * abs(mass_v0):
            counts["mass_drift_v"] += 1
        if rec.w_bound_slack < -W_BOUND_TOL * scale_w:
            counts["w_bound"] += 1
        if rec.min_u < 0 or rec.min_v < 0 or rec.min_w <= 0:
            counts["positivity"] += 1
        # entropies are sums of canceling terms; near convergence their true
        # values sit below the summation roundoff, so allow that much slack
        if rec.kl_u < -1e-12 or rec.kl_v < -1e-12:
            counts["kl_negative"] += 1
        if rec.energy < -1e-12 or rec.dissipation < -1e-12:
            counts["energy_negative"] += 1
    return counts


def fit_from_records(records: list[DiagnosticsRecord], tail_fraction: float) -> DecayFit:
    """Exponential fit of the forager sup-deviation over the tail window."""
    times = [rec.t for rec in records]
    values = [rec.linf_dev_u for rec in records]
    return fit_decay_rate(times, values, tail_fraction)


def build_summary(
    trajectory: Trajectory,
    params: ModelParams,
    fit: DecayFit | None,
    margin: MarginInfo | None,
    tail_fraction: float,
) -> dict:
    """Assemble the run summary document."""
    recs = trajectory.records
    eq = trajectory.equilibrium
    final = recs[-1] if recs else None
    tail_ratio_max = None
    tail_ratio_median = None
    b_feasible_tail = None
    if recs:
        mask = tail_slice([rec.t for rec in recs], tail_fraction)
        tail = [rec for rec, keep in zip(recs, mask) if keep]
        ratios = [rec.energy / rec.dissipation for rec in tail if rec.dissipation > 0]
        if ratios:
            tail_ratio_max = max(ratios)
            tail_ratio_median = float(np.median(ratios))
        b_feasible_tail = all(rec.b_feasible for rec in tail)
    summary = {
        "termination": trajectory.termination,
        "converged": trajectory.termination == TERMINATION_STEADY,
        "error": trajectory.error_message,
        "t_final": final.t if final else None,
        "records": len(recs),
        "final_deviations": {
            "u": final.linf_dev_u if final else None,
            "v": final.linf_dev_v if final else None,
            "w": final.linf_dev_w if final else None,
        },
        "equilibrium": {"ubar0": eq.ubar0, "vbar0": eq.vbar0, "wstar": eq.wstar},
        "decay_fit": (
            {
                "alpha": fit.alpha,
                "c": fit.c,
                "r_squared": fit.r_squared,
                "window_start": fit.window[0],
                "window_end": fit.window[1],
            }
            if fit
            else None
        ),
        "stability": (
            {"margin": margin.margin, "normalized": margin.normalized} if margin else None
        ),
        "energy": {
            "b_used_final": final.b_used if final else None,
            "b_feasible_final": final.b_feasible if final else None,
            "b_feasible_tail": b_feasible_tail,
            "ratio_energy_over_dissipation_tail_max": tail_ratio_max,
            "ratio_energy_over_dissipation_tail_median": tail_ratio_median,
        },
        "invariant_violations": count_violations(trajectory, params),
    }
    return summary


def write_summary(
    trajectory: Trajectory,
    params: ModelParams,
    fit: DecayFit | None,
    equilibrium: EquilibriumInfo,
    margin: MarginInfo | None,
    tail_fraction: float,
    out_dir: str,
) -> str:
    """Write the structured run summary next to the time series."""
    if equilibrium != trajectory.equilibrium:
        raise ValueError("equilibrium info does not match the trajectory")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "summary.json")
    summary = build_summary(trajectory, params, fit, margin, tail_fraction)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return path
