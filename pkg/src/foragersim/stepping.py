"""Time integration: positivity-preserving IMEX stepping and run orchestration.

One step is a Lie splitting per species: explicit donor-cell taxis transport
(with the exploiter advected by the pre-update forager gradients), then
implicit backward-Euler diffusion, and finally the nutrient update with
implicit diffusion, semi-implicit absorption lam (u_new + v_new) + mu, and
explicit supply r.  Every sub-step conserves the population masses exactly
(telescoping fluxes / zero-column-sum Laplacian) and preserves positivity
under the CFL bound on the explicit transport.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import DiagnosticsRecord, EnergyConfig, compute_record
from .model import (
    EquilibriumInfo,
    FieldState,
    Grid,
    InitialCondition,
    InvariantViolation,
    ModelParams,
    equilibrium_from_state,
    init_state,
)
from .operators import assemble_diffusion_system, taxis_divergence, thomas_solve

# deepest allowed negative excursion before a density counts as invalid
NEGATIVITY_TOLERANCE = 1e-12

TERMINATION_T_END = "reached_t_end"
TERMINATION_STEADY = "steady_state"
TERMINATION_ERROR = "error"

# guards division by zero speed in the CFL formula
_SPEED_FLOOR = 1e-30

# events closer than this relative amount to the current time are "reached"
_TIME_SNAP = 1e-12


@dataclass(frozen=True)
class StepControl:
    """Run-level stepping knobs.

    dt is the smaller of dt_max and safety * dx / (max face speed), further
    clamped so records, snapshots, and t_end are hit exactly.  Steady state
    is declared once all sup-deviations from the homogeneous equilibrium stay
    below steady_tol for two consecutive records.
    """

    t_end: float
    safety: float = 0.9
    dt_max: float = 1e-2
    output_every: float = 0.1
    steady_tol: float = 1e-9
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety!r}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max!r}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if not self.output_every > 0:
            raise ValueError(f"output_every must be positive, got {self.output_every!r}")
        if not self.steady_tol > 0:
            raise ValueError(f"steady_tol must be positive, got {self.steady_tol!r}")
        object.__setattr__(self, "snapshot_times", tuple(float(s) for s in self.snapshot_times))


@dataclass
class Trajectory:
    """Result of one simulation: records at the output cadence, sparse field
    snapshots at requested times, and how the run ended."""

    records: list[DiagnosticsRecord]
    snapshots: list[FieldState]
    termination: str
    equilibrium: EquilibriumInfo
    final_state: FieldState
    w0_max: float
    error_message: str | None = None


def cfl_dt(state: FieldState, params: ModelParams, grid: Grid, control: StepControl) -> float:
    """Time step from the explicit-transport stability bound.

    Face speeds are chi1 * |grad w| for the foragers and chi2 * |grad u| for
    the exploiters; dt = min(dt_max, safety * dx / max speed).
    """
    grad_w = np.abs(np.diff(state.w)) / grid.dx
    grad_u = np.abs(np.diff(state.u)) / grid.dx
    speed_u = params.chi1 * (float(grad_w.max()) if grad_w.size else 0.0)
    speed_v = params.chi2 * (float(grad_u.max()) if grad_u.size else 0.0)
    speed = max(speed_u, speed_v, _SPEED_FLOOR)
    return min(control.dt_max, control.safety * grid.dx / speed)


def imex_step(state: FieldState, params: ModelParams, grid: Grid, dt: float) -> FieldState:
    """Advance one Lie-split IMEX step of size dt.

    The exploiter transport uses the pre-update forager field (frozen
    coefficients), so the two explicit updates commute with each other.  The
    output is invariant-checked; a density below -1e-12 or a non-positive
    nutrient raises InvariantViolation naming the field and cell.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    tend_u, _ = taxis_divergence(state.u, state.w, params.chi1, grid)
    tend_v, _ = taxis_divergence(state.v, state.u, params.chi2, grid)
    u_star = state.u + dt * tend_u
    v_star = state.v + dt * tend_v
    u_new = thomas_solve(assemble_diffusion_system(u_star, 1.0, dt, grid))
    v_new = thomas_solve(assemble_diffusion_system(v_star, 1.0, dt, grid))
    absorption = params.lam * (u_new + v_new) + params.mu
    supply = np.full(grid.n, params.r)
    w_new = thomas_solve(
        assemble_diffusion_system(state.w, params.d, dt, grid, absorption, supply)
    )
    new_state = FieldState(t=state.t + dt, u=u_new, v=v_new, w=w_new)
    new_state.check_invariants(neg_tol=NEGATIVITY_TOLERANCE)
    return new_state


def _near(t: float, target: float) -> bool:
    return abs(t - target) <= _TIME_SNAP * max(1.0, abs(target))


def run_simulation(
    ic: InitialCondition,
    params: ModelParams,
    grid: Grid,
    control: StepControl,
    energy_cfg: EnergyConfig | None = None,
) -> Trajectory:
    """Step from the initial condition until t_end, steady state, or an
    invariant violation.

    Records are emitted at every multiple of output_every and at the final
    time; snapshots at the requested times (which the stepper hits exactly).
    On an invariant violation the trajectory is returned with
    termination="error" and the last good state.
    """
    if energy_cfg is None:
        energy_cfg = EnergyConfig()
    state = init_state(ic, grid)
    equilibrium = equilibrium_from_state(params, state, grid)
    w0_max = float(state.w.max())
    sup_u = float(state.u.max())
    sup_v = float(state.v.max())
    sup_w = w0_max

    snapshot_queue = sorted(
        {s for s in control.snapshot_times if 0.0 <= s <= control.t_end}
    )
    records: list[DiagnosticsRecord] = []
    snapshots: list[FieldState] = []

    if snapshot_queue and _near(0.0, snapshot_queue[0]):
        snapshots.append(state)
        snapshot_queue.pop(0)

    record_index = 1
    steady_streak = 0
    termination: str | None = None
    error_message: str | None = None

    while termination is None:
        next_record_t = record_index * control.output_every
        targets = [control.t_end, next_record_t]
        if snapshot_queue:
            targets.append(snapshot_queue[0])
        next_event = min(targets)

        dt = min(cfl_dt(state, params, grid, control), next_event - state.t)
        try:
            state = imex_step(state, params, grid, dt)
        except InvariantViolation as exc:
            termination = TERMINATION_ERROR
            error_message = str(exc)
            break

        sup_u = max(sup_u, float(state.u.max()))
        sup_v = max(sup_v, float(state.v.max()))
        sup_w = max(sup_w, float(state.w.max()))

        if _near(state.t, next_event):
            state = replace(state, t=next_event)  # kill time accumulation drift
            if snapshot_queue and _near(next_event, snapshot_queue[0]):
                snapshots.append(state)
                snapshot_queue.pop(0)
            at_record = _near(next_event, next_record_t)
            at_end = _near(next_event, control.t_end)
            if at_record or at_end:
                rec = compute_record(
                    state, equilibrium, params, grid, energy_cfg, sup_u, sup_v, sup_w, w0_max
                )
                records.append(rec)
                if at_record:
                    record_index += 1
                if (
                    rec.linf_dev_u < control.steady_tol
                    and rec.linf_dev_v < control.steady_tol
                    and rec.linf_dev_w < control.steady_tol
                ):
                    steady_streak += 1
                else:
                    steady_streak = 0
                if steady_streak >= 2:
                    termination = TERMINATION_STEADY
            if at_end and termination is None:
                termination = TERMINATION_T_END

    return Trajectory(
        records=records,
        snapshots=snapshots,
        termination=termination,
        equilibrium=equilibrium,
        final_state=state,
        w0_max=w0_max,
        error_message=error_message,
    )
