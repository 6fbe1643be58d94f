"""Scalar functionals evaluated on states and trajectories.

Covers the checkable quantities of the model: deviation norms against the
homogeneous equilibrium, relative entropies, the conditional Lyapunov pair
(energy and dissipation built from relative entropies and relative Fisher
terms), the admissible weight interval for the exploiter entropy, the
nutrient sup-bound slack, Csiszar-Kullback slack, and exponential-rate fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import EquilibriumInfo, FieldState, Grid, ModelParams, mass_and_mean

# face densities in relative Fisher terms are floored here when a zero-density
# face meets a nonzero gradient; strictly positive fields never hit the floor
FACE_DENSITY_FLOOR = 1e-30


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-output-time scalars, one row of the time-series report."""

    t: float
    mass_u: float
    mass_v: float
    min_u: float
    max_u: float
    min_v: float
    max_v: float
    min_w: float
    max_w: float
    linf_dev_u: float
    linf_dev_v: float
    linf_dev_w: float
    l1_dev_u: float
    l1_dev_v: float
    kl_u: float
    kl_v: float
    grad_l2_u: float
    grad_l2_v: float
    grad_l2_w: float
    energy: float
    dissipation: float
    b_used: float
    b_feasible: bool
    w_bound_slack: float


@dataclass(frozen=True)
class EnergyConfig:
    """How the energy diagnostics pick the exploiter-entropy weight b.

    b_mode is "auto" (geometric mean of the admissible interval) or a fixed
    positive number.  Lu/Lv/Lw, when set, override the running sup-norms that
    bound the interval; by default the simulation tracks them itself.
    """

    b_mode: str | float = "auto"
    tail_fraction: float = 0.5
    Lu: float | None = None
    Lv: float | None = None
    Lw: float | None = None

    def __post_init__(self):
        if isinstance(self.b_mode, str):
            if self.b_mode != "auto":
                raise ValueError(f"b_mode must be 'auto' or a positive number, got {self.b_mode!r}")
        elif not (math.isfinite(self.b_mode) and self.b_mode > 0):
            raise ValueError(f"fixed b must be positive and finite, got {self.b_mode!r}")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ValueError(f"tail_fraction must lie in (0, 1), got {self.tail_fraction!r}")
        for name in ("Lu", "Lv", "Lw"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} override must be positive, got {value!r}")


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit value ~= c * exp(-alpha * t)."""

    alpha: float
    c: float
    r_squared: float
    window: tuple[float, float]


def deviation_norms(
    state: FieldState, ubar0: float, vbar0: float, wstar: float, grid: Grid
) -> tuple[float, float, float, float, float, float]:
    """Sup and L1 deviations of (u, v, w) from the homogeneous state.

    Returns (linf_u, linf_v, linf_w, l1_u, l1_v, l1_w).
    """
    du = np.abs(state.u - ubar0)
    dv = np.abs(state.v - vbar0)
    dw = np.abs(state.w - wstar)
    return (
        float(du.max()),
        float(dv.max()),
        float(dw.max()),
        grid.dx * math.fsum(du),
        grid.dx * math.fsum(dv),
        grid.dx * math.fsum(dw),
    )


def kl_entropy(field: np.ndarray, mean: float, grid: Grid) -> float:
    """Relative entropy dx * sum(field * ln(field / mean)) with the
    integrand continuously extended by 0 at zero cells.  Nonnegative whenever
    the field's mean equals ``mean`` (Jensen)."""
    if not mean > 0:
        raise ValueError(f"kl_entropy needs a positive mean, got {mean!r}")
    f = np.asarray(field, dtype=float)
    pos = f > 0
    terms = np.zeros_like(f)
    terms[pos] = f[pos] * np.log(f[pos] / mean)
    return grid.dx * math.fsum(terms)


def grad_l2(field: np.ndarray, grid: Grid) -> float:
    """Discrete L2 norm of the gradient, sqrt(dx * sum_faces (df/dx)^2);
    zero-flux boundary faces contribute nothing."""
    f = np.asarray(field, dtype=float)
    diffs = (f[1:] - f[:-1]) / grid.dx
    return math.sqrt(grid.dx * float(np.dot(diffs, diffs)))


def relative_fisher(field: np.ndarray, grid: Grid) -> float:
    """Discrete relative Fisher information dx * sum_faces (df/dx)^2 / f_face
    with harmonic-mean face values.

    A face between zero cells has both zero gradient and zero face density;
    its contribution is defined as 0.  A zero-density face with a nonzero
    gradient only occurs outside the strictly positive regime the theory
    covers; the face density is floored there to keep the sum finite.
    """
    f = np.asarray(field, dtype=float)
    grad = (f[1:] - f[:-1]) / grid.dx
    s = f[1:] + f[:-1]
    hmean = np.divide(2.0 * f[1:] * f[:-1], s, out=np.zeros_like(s), where=s > 0)
    contrib = np.divide(
        grad**2,
        np.maximum(hmean, FACE_DENSITY_FLOOR),
        out=np.zeros_like(grad),
        where=grad != 0.0,
    )
    return grid.dx * math.fsum(contrib)


def choose_b(
    params: ModelParams, Lu: float, Lv: float, Lw: float, mode: str | float = "auto"
) -> tuple[float, bool]:
    """Pick the exploiter-entropy weight from the admissible interval

        4 chi1 lam Lv Lw / mu  <=  b  <=  1 / (2 chi2^2 Lu Lv)

    where Lu, Lv, Lw are sup-norm bounds of the three fields.  In auto mode
    the geometric mean of the endpoints is returned when the interval is
    nonempty (maximizing multiplicative slack), otherwise the lower endpoint
    with feasible=False.  A fixed b reports whether it lies in the interval.
    """
    if not (Lu > 0 and Lv > 0 and Lw > 0):
        raise ValueError("sup-norm bounds Lu, Lv, Lw must be positive")
    lower = 4.0 * params.chi1 * params.lam * Lv * Lw / params.mu
    upper = 1.0 / (2.0 * params.chi2**2 * Lu * Lv)
    feasible = lower <= upper
    if isinstance(mode, str):
        if mode != "auto":
            raise ValueError(f"unknown b mode {mode!r}")
        b = math.sqrt(lower * upper) if feasible else lower
        return b, feasible
    b = float(mode)
    if not b > 0:
        raise ValueError(f"fixed b must be positive, got {b!r}")
    return b, bool(feasible and lower <= b <= upper)


def lyapunov_energy(
    state: FieldState,
    ubar0: float,
    vbar0: float,
    b: float,
    params: ModelParams,
    grid: Grid,
) -> float:
    """Conditional energy: relative entropy of u plus b times that of v plus
    chi1/(2 lam) times the relative Fisher term of w.  Nonnegative for b > 0."""
    if not b > 0:
        raise ValueError(f"energy weight b must be positive, got {b!r}")
    if state.w.min() <= 0:
        raise ValueError("energy requires strictly positive w")
    return (
        kl_entropy(state.u, ubar0, grid)
        + b * kl_entropy(state.v, vbar0, grid)
        + params.chi1 / (2.0 * params.lam) * relative_fisher(state.w, grid)
    )


def lyapunov_dissipation(
    state: FieldState, b: float, params: ModelParams, grid: Grid
) -> float:
    """Dissipation paired with :func:`lyapunov_energy`: half the relative
    Fisher terms of u and (weighted) v plus chi1 mu/(4 lam) times that of w."""
    if not b > 0:
        raise ValueError(f"dissipation weight b must be positive, got {b!r}")
    if state.w.min() <= 0:
        raise ValueError("dissipation requires strictly positive w")
    return (
        0.5 * relative_fisher(state.u, grid)
        + 0.5 * b * relative_fisher(state.v, grid)
        + params.chi1 * params.mu / (4.0 * params.lam) * relative_fisher(state.w, grid)
    )


def w_sup_bound(params: ModelParams, w0_max: float, t: float) -> float:
    """Comparison upper bound r/mu + max(w0) * exp(-mu t) for the nutrient."""
    return params.r / params.mu + w0_max * math.exp(-params.mu * t)


def w_bound_check(record: DiagnosticsRecord, params: ModelParams, w0_max: float) -> float:
    """Slack of the nutrient sup-bound at a record: bound(t) - max w(t).
    Negative slack beyond roundoff tolerance marks a violation."""
    return w_sup_bound(params, w0_max, record.t) - record.max_w


def csiszar_kullback_check(
    state: FieldState, ubar0: float, vbar0: float, grid: Grid
) -> tuple[float, float]:
    """Slack of the Csiszar-Kullback inequality with the classical constant:

        2 ||f||_L1 * KL(f | fbar) - ||f - fbar||_L1^2  >=  0

    for f = u and f = v.  Exact in the discrete setting, so slacks should
    only dip below zero by roundoff.
    """
    mass_u, _ = mass_and_mean(state.u, grid)
    mass_v, _ = mass_and_mean(state.v, grid)
    _, _, _, l1_u, l1_v, _ = deviation_norms(state, ubar0, vbar0, 0.0, grid)
    slack_u = 2.0 * mass_u * kl_entropy(state.u, ubar0, grid) - l1_u**2
    slack_v = 2.0 * mass_v * kl_entropy(state.v, vbar0, grid) - l1_v**2
    return slack_u, slack_v


def fit_decay_rate(
    times: Sequence[float], values: Sequence[float], tail_fraction: float = 0.5
) -> DecayFit:
    """Least-squares line on (t, ln value) over the trailing window covering
    ``tail_fraction`` of the time span; alpha is minus the slope.

    Requires at least 8 strictly positive values inside the window.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size:
        raise ValueError("times and values must have equal length")
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1), got {tail_fraction!r}")
    if t.size == 0:
        raise ValueError("empty series")
    t_start = t[-1] - tail_fraction * (t[-1] - t[0])
    sel = t >= t_start
    t_win, y_win = t[sel], y[sel]
    if t_win.size < 8:
        raise ValueError(f"need at least 8 points in the fit window, got {t_win.size}")
    if y_win.min() <= 0.0:
        raise ValueError("fit window contains non-positive values (log undefined)")
    logy = np.log(y_win)
    slope, intercept = np.polyfit(t_win, logy, 1)
    resid = logy - (slope * t_win + intercept)
    ss_res = float(np.dot(resid, resid))
    centered = logy - logy.mean()
    ss_tot = float(np.dot(centered, centered))
    if ss_tot <= 1e-300:
        r_squared = 1.0 if ss_res <= 1e-12 else 0.0
    else:
        r_squared = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return DecayFit(
        alpha=float(-slope),
        c=float(math.exp(intercept)),
        r_squared=r_squared,
        window=(float(t_win[0]), float(t_win[-1])),
    )


def dissipation_quotient_check(
    times: Sequence[float],
    energies: Sequence[float],
    dissipations: Sequence[float],
    tol_coeff: float = 1e-3,
) -> tuple[int, int, float]:
    """Discrete energy-decay test over consecutive samples.

    Checks (F(t+dt) - F(t)) / dt <= -D(t) + tol_coeff * (1 + D(t)) for every
    consecutive pair; the additive/relative tolerance absorbs discretization
    error of the continuum inequality F' <= -D.  Returns
    (pairs, violations, worst_excess) with excess measured against the
    tolerance-shifted right side.
    """
    t = np.asarray(times, dtype=float)
    f_vals = np.asarray(energies, dtype=float)
    d_vals = np.asarray(dissipations, dtype=float)
    if not (t.size == f_vals.size == d_vals.size):
        raise ValueError("times, energies, dissipations must have equal length")
    if t.size < 2:
        return 0, 0, 0.0
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("times must be strictly increasing")
    quotient = np.diff(f_vals) / dt
    allowed = -d_vals[:-1] + tol_coeff * (1.0 + d_vals[:-1])
    excess = quotient - allowed
    violations = int(np.sum(excess > 0.0))
    return int(dt.size), violations, float(excess.max())


def tail_slice(times: Sequence[float], tail_fraction: float) -> np.ndarray:
    """Boolean mask selecting the trailing window used by tail diagnostics."""
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        return np.zeros(0, dtype=bool)
    t_start = t[-1] - tail_fraction * (t[-1] - t[0])
    return t >= t_start


def compute_record(
    state: FieldState,
    equilibrium: EquilibriumInfo,
    params: ModelParams,
    grid: Grid,
    energy_cfg: EnergyConfig,
    sup_u: float,
    sup_v: float,
    sup_w: float,
    w0_max: float,
) -> DiagnosticsRecord:
    """Evaluate every per-record scalar on one state.

    sup_u/v/w are the running sup-norms of the trajectory so far (overridden
    by EnergyConfig.Lu/Lv/Lw when set); they bound the admissible b-interval.
    """
    mass_u, _ = mass_and_mean(state.u, grid)
    mass_v, _ = mass_and_mean(state.v, grid)
    linf_u, linf_v, linf_w, l1_u, l1_v, _ = deviation_norms(
        state, equilibrium.ubar0, equilibrium.vbar0, equilibrium.wstar, grid
    )
    b, feasible = choose_b(
        params,
        energy_cfg.Lu if energy_cfg.Lu is not None else sup_u,
        energy_cfg.Lv if energy_cfg.Lv is not None else sup_v,
        energy_cfg.Lw if energy_cfg.Lw is not None else sup_w,
        mode=energy_cfg.b_mode,
    )
    return DiagnosticsRecord(
        t=state.t,
        mass_u=mass_u,
        mass_v=mass_v,
        min_u=float(state.u.min()),
        max_u=float(state.u.max()),
        min_v=float(state.v.min()),
        max_v=float(state.v.max()),
        min_w=float(state.w.min()),
        max_w=float(state.w.max()),
        linf_dev_u=linf_u,
        linf_dev_v=linf_v,
        linf_dev_w=linf_w,
        l1_dev_u=l1_u,
        l1_dev_v=l1_v,
        kl_u=kl_entropy(state.u, equilibrium.ubar0, grid),
        kl_v=kl_entropy(state.v, equilibrium.vbar0, grid),
        grad_l2_u=grad_l2(state.u, grid),
        grad_l2_v=grad_l2(state.v, grid),
        grad_l2_w=grad_l2(state.w, grid),
        energy=lyapunov_energy(state, equilibrium.ubar0, equilibrium.vbar0, b, params, grid),
        dissipation=lyapunov_dissipation(state, b, params, grid),
        b_used=b,
        b_feasible=feasible,
        w_bound_slack=w_sup_bound(params, w0_max, state.t) - float(state.w.max()),
    )
