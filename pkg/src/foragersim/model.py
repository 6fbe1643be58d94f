"""Core state of the 1D forager-exploiter system.

The model couples two population densities and a nutrient on a bounded
interval with zero-flux boundaries:

    u_t = u_xx - chi1 (u w_x)_x            foragers climb nutrient gradients
    v_t = v_xx - chi2 (v u_x)_x            exploiters climb forager gradients
    w_t = d w_xx - lam (u + v) w - mu w + r

All fields live as cell averages on a uniform cell-centered mesh.  This
module holds the parameter/grid/field containers, initial-condition
generators, the spatially homogeneous equilibrium, and the formal
homogenization threshold used to predict relaxation versus patterning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class InvariantViolation(RuntimeError):
    """A simulated state broke a structural guarantee (negative density,
    non-positive nutrient).  Raised instead of clamping so that scheme
    defects surface immediately."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the system.  All must be positive except the supply
    rate ``r``, which may be zero."""

    chi1: float  # forager taxis sensitivity toward the nutrient
    chi2: float  # exploiter taxis sensitivity toward foragers
    d: float     # nutrient diffusivity
    lam: float   # nutrient consumption rate per unit total density
    mu: float    # spontaneous nutrient decay rate
    r: float     # nutrient supply rate

    def __post_init__(self):
        for name in ("chi1", "chi2", "d", "lam", "mu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"ModelParams.{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"ModelParams.r must be >= 0 and finite, got {self.r!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh: ``n`` cells of width ``dx`` covering an
    interval of the given length.  Cell centers sit at (i + 1/2) dx."""

    n: int
    length: float
    dx: float

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx


def build_grid(n: int, length: float) -> Grid:
    """Build the mesh.  Requires at least 4 cells and a positive length."""
    n = int(n)
    if n < 4:
        raise ValueError(f"grid needs n >= 4 cells, got {n}")
    if not (math.isfinite(length) and length > 0):
        raise ValueError(f"grid length must be positive and finite, got {length!r}")
    return Grid(n=n, length=float(length), dx=float(length) / n)


def _read_only(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FieldState:
    """The triple (u, v, w) of cell-average arrays at one time.

    Arrays are stored read-only; stepping produces fresh states.  Structural
    expectations (u, v nonnegative; w strictly positive) are checked via
    :meth:`check_invariants`, not at construction, so that diagnostics can be
    evaluated on candidate states before accepting them.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        u, v, w = _read_only(self.u), _read_only(self.v), _read_only(self.w)
        if not (u.ndim == v.ndim == w.ndim == 1 and u.size == v.size == w.size):
            raise ValueError("u, v, w must be 1D arrays of equal length")
        for name, arr in (("u", u), ("v", v), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"field {name} contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.u.size

    def check_invariants(self, neg_tol: float = 0.0) -> None:
        """Raise :class:`InvariantViolation` naming field and cell if a
        density falls below ``-neg_tol`` or the nutrient is not positive."""
        for name, arr in (("u", self.u), ("v", self.v)):
            i = int(np.argmin(arr))
            if arr[i] < -neg_tol:
                raise InvariantViolation(
                    f"{name} negative at cell {i} (t={self.t!r}): {arr[i]!r}"
                )
        i = int(np.argmin(self.w))
        if self.w[i] <= 0.0:
            raise InvariantViolation(
                f"w non-positive at cell {i} (t={self.t!r}): {self.w[i]!r}"
            )


# --- initial conditions -----------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class ConstantPlusCosine:
    """Mean ``base`` plus a zero-flux-compatible cosine fluctuation
    amplitude * cos(mode * pi * x / length).  The sampled fluctuation is
    recentered so the discrete mean equals ``base`` exactly."""

    base: float
    amplitude: float
    mode: int


@dataclass(frozen=True)
class GaussianBump:
    center: float
    width: float
    height: float
    baseline: float = 0.0


@dataclass(frozen=True)
class FromFile:
    """One float per line, exactly one value per grid cell."""

    path: str


@dataclass(frozen=True)
class RescaledToMean:
    """Wraps another spec and rescales the sampled field to a target mean.
    Used by parameter sweeps that move population averages."""

    inner: "FieldSpec"
    mean: float


FieldSpec = Union[Constant, ConstantPlusCosine, GaussianBump, FromFile, RescaledToMean]


@dataclass(frozen=True)
class InitialCondition:
    u: FieldSpec
    v: FieldSpec
    w: FieldSpec


def sample_field(spec: FieldSpec, grid: Grid) -> np.ndarray:
    """Evaluate a field spec as cell values on the grid."""
    if isinstance(spec, Constant):
        return np.full(grid.n, float(spec.value))
    if isinstance(spec, ConstantPlusCosine):
        if int(spec.mode) < 1:
            raise ValueError(f"cosine mode must be a positive integer, got {spec.mode!r}")
        x = grid.cell_centers()
        field = spec.base + spec.amplitude * np.cos(int(spec.mode) * np.pi * x / grid.length)
        # the sampled cosine has mean ~0 up to quadrature roundoff; remove the
        # residual so the discrete mean is exact
        for _ in range(2):
            field = field - (grid.dx * math.fsum(field) / grid.length - spec.base)
        return field
    if isinstance(spec, GaussianBump):
        if not spec.width > 0:
            raise ValueError(f"gaussian width must be positive, got {spec.width!r}")
        x = grid.cell_centers()
        return spec.baseline + spec.height * np.exp(-0.5 * ((x - spec.center) / spec.width) ** 2)
    if isinstance(spec, FromFile):
        data = np.loadtxt(spec.path, dtype=float)
        data = np.atleast_1d(data)
        if data.ndim != 1 or data.size != grid.n:
            raise ValueError(
                f"{spec.path}: expected {grid.n} values (one per cell), got shape {data.shape}"
            )
        return data.astype(float)
    if isinstance(spec, RescaledToMean):
        field = sample_field(spec.inner, grid)
        current = grid.dx * math.fsum(field) / grid.length
        if current <= 0:
            raise ValueError("cannot rescale a field with non-positive mean")
        if not spec.mean > 0:
            raise ValueError(f"target mean must be positive, got {spec.mean!r}")
        return field * (spec.mean / current)
    raise TypeError(f"unknown field spec {spec!r}")


def init_state(ic: InitialCondition, grid: Grid) -> FieldState:
    """Sample the initial condition and validate admissibility: u and v
    nonnegative with positive mass, w strictly positive."""
    u0 = sample_field(ic.u, grid)
    v0 = sample_field(ic.v, grid)
    w0 = sample_field(ic.w, grid)
    for name, arr in (("u", u0), ("v", v0)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"initial {name} contains non-finite values")
        if arr.min() < 0:
            raise ValueError(f"initial {name} is negative at cell {int(np.argmin(arr))}")
        if grid.dx * math.fsum(arr) <= 0:
            raise ValueError(f"initial {name} must have positive mass")
    if not np.all(np.isfinite(w0)):
        raise ValueError("initial w contains non-finite values")
    if w0.min() <= 0:
        raise ValueError(f"initial w must be strictly positive, violated at cell {int(np.argmin(w0))}")
    return FieldState(t=0.0, u=u0, v=v0, w=w0)


# --- integrals, equilibrium, threshold ---------------------------------------

def mass_and_mean(field: np.ndarray, grid: Grid) -> tuple[float, float]:
    """Cell-measure integral and average: mass = dx * sum(field),
    mean = mass / length.  Uses compensated summation."""
    mass = grid.dx * math.fsum(field)
    return mass, mass / grid.length


@dataclass(frozen=True)
class EquilibriumInfo:
    """Initial averages and the homogeneous nutrient equilibrium they pin."""

    ubar0: float
    vbar0: float
    wstar: float


def equilibrium_w(params: ModelParams, ubar0: float, vbar0: float) -> float:
    """Homogeneous nutrient equilibrium r / (lam (ubar0 + vbar0) + mu).

    Zero exactly when the supply r is zero; the denominator is always
    positive since mu > 0.
    """
    if ubar0 < 0 or vbar0 < 0:
        raise ValueError("population averages must be nonnegative")
    return params.r / (params.lam * (ubar0 + vbar0) + params.mu)


def equilibrium_from_state(params: ModelParams, state: FieldState, grid: Grid) -> EquilibriumInfo:
    _, ubar0 = mass_and_mean(state.u, grid)
    _, vbar0 = mass_and_mean(state.v, grid)
    return EquilibriumInfo(ubar0=ubar0, vbar0=vbar0, wstar=equilibrium_w(params, ubar0, vbar0))


def stability_margin(
    params: ModelParams, ubar0: float, vbar0: float, grid: Grid
) -> tuple[float, bool]:
    """Formal homogenization margin.

    Evaluates

        8 (lam + mu)^2 (d + 1) / (lam r chi1 ubar0 vbar0) + 2 (d + 1) / vbar0 - chi2

    A positive margin predicts relaxation to the homogeneous state.  The
    prediction is calibrated for the normalized setting (unit interval,
    ubar0 + vbar0 = 1); the returned flag records whether that holds.  The
    margin is still computed, and merely flagged, outside it.
    """
    if params.r <= 0:
        raise ValueError("stability margin requires r > 0 (the threshold divides by r)")
    if ubar0 <= 0 or vbar0 <= 0:
        raise ValueError("stability margin requires positive population averages")
    lhs = (
        8.0 * (params.lam + params.mu) ** 2 * (params.d + 1.0)
        / (params.lam * params.r * params.chi1 * ubar0 * vbar0)
        + 2.0 * (params.d + 1.0) / vbar0
    )
    normalized = grid.length == 1.0 and abs(ubar0 + vbar0 - 1.0) <= 1e-12
    return lhs - params.chi2, normalized
