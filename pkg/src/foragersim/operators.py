"""Conservative spatial operators on the uniform cell-centered mesh.

Zero-flux boundaries are realized with mirror ghost cells for diffusion and
identically zero boundary fluxes for the upwind taxis transport, so every
operator telescopes: dx * sum(output) == 0 to machine precision.  The
implicit diffusion solves go through a tridiagonal Thomas solver; systems
assembled here are strictly diagonally dominant M-matrices, which makes the
solve positivity-preserving for nonnegative right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Grid

# pivots below this magnitude abort the tridiagonal solve
NEAR_SINGULAR_PIVOT = 1e-30


@dataclass(frozen=True)
class TridiagonalSystem:
    lower: np.ndarray  # n-1 subdiagonal entries
    diag: np.ndarray   # n diagonal entries
    upper: np.ndarray  # n-1 superdiagonal entries
    rhs: np.ndarray    # n right-hand side entries


@dataclass(frozen=True)
class FaceFluxes:
    """Fluxes at the n+1 cell faces; the two boundary entries are zero."""

    flux: np.ndarray


def laplacian_neumann(field: np.ndarray, grid: Grid) -> np.ndarray:
    """Three-point Laplacian with mirrored ghost cells.

    Exactly conservative: the boundary rows see a reflected neighbor, so the
    row sums telescope and dx * sum(result) vanishes for every input.
    Second-order accurate on smooth zero-flux-compatible fields.
    """
    f = np.asarray(field, dtype=float)
    inv_dx2 = 1.0 / grid.dx**2
    out = np.empty_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) * inv_dx2
    out[0] = (f[1] - f[0]) * inv_dx2
    out[-1] = (f[-2] - f[-1]) * inv_dx2
    return out


def upwind_face_fluxes(
    density: np.ndarray, potential: np.ndarray, chi: float, grid: Grid
) -> tuple[FaceFluxes, float]:
    """Donor-cell fluxes for the taxis term chi * (density * potential_x).

    Face velocity is chi times the two-point potential gradient; the face
    density is taken from the upwind cell (arithmetic average at exactly-zero
    velocity, where the flux vanishes anyway).  Boundary faces carry zero
    flux.  Also returns the largest face speed for time-step control.
    """
    dens = np.asarray(density, dtype=float)
    pot = np.asarray(potential, dtype=float)
    vel = chi * (pot[1:] - pot[:-1]) / grid.dx
    upwind = np.where(
        vel > 0.0,
        dens[:-1],
        np.where(vel < 0.0, dens[1:], 0.5 * (dens[:-1] + dens[1:])),
    )
    flux = np.zeros(dens.size + 1)
    flux[1:-1] = vel * upwind
    max_speed = float(np.max(np.abs(vel))) if vel.size else 0.0
    return FaceFluxes(flux=flux), max_speed


def taxis_divergence(
    density: np.ndarray, potential: np.ndarray, chi: float, grid: Grid
) -> tuple[np.ndarray, float]:
    """Tendency -(F_{i+1/2} - F_{i-1/2}) / dx of the upwind taxis flux,
    plus the maximum face speed.  Sums to zero exactly (telescoping)."""
    faces, max_speed = upwind_face_fluxes(density, potential, chi, grid)
    tendency = -(faces.flux[1:] - faces.flux[:-1]) / grid.dx
    return tendency, max_speed


def assemble_diffusion_system(
    field_old: np.ndarray,
    diffusivity: float,
    dt: float,
    grid: Grid,
    extra_diag: np.ndarray | None = None,
    extra_rhs: np.ndarray | None = None,
) -> TridiagonalSystem:
    """Backward-Euler diffusion step with optional semi-implicit absorption.

    Encodes (I/dt - diffusivity * L + diag(extra_diag)) x = field_old/dt + extra_rhs
    with L the mirrored-ghost Laplacian.  For the nutrient the caller passes
    extra_diag = lam (u + v) + mu and extra_rhs = r, which keeps the matrix an
    M-matrix and the right-hand side nonnegative, hence x >= 0.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if diffusivity < 0:
        raise ValueError(f"diffusivity must be nonnegative, got {diffusivity!r}")
    f = np.asarray(field_old, dtype=float)
    n = f.size
    k = diffusivity / grid.dx**2
    diag = np.full(n, 1.0 / dt + 2.0 * k)
    diag[0] = 1.0 / dt + k
    diag[-1] = 1.0 / dt + k
    if extra_diag is not None:
        extra_diag = np.asarray(extra_diag, dtype=float)
        if extra_diag.min() < 0:
            raise ValueError("extra_diag must be nonnegative (absorption only)")
        diag = diag + extra_diag
    rhs = f / dt
    if extra_rhs is not None:
        rhs = rhs + np.asarray(extra_rhs, dtype=float)
    off = np.full(n - 1, -k)
    return TridiagonalSystem(lower=off, diag=diag, upper=off.copy(), rhs=rhs)


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """Solve the tridiagonal system by forward elimination and back
    substitution (O(n), no pivoting: callers assemble strictly diagonally
    dominant systems).  Raises on a near-singular pivot.

    Runs on plain Python floats: per-element ndarray indexing is several
    times slower and this sits in the stepping hot loop.
    """
    b = np.asarray(system.diag, dtype=float).tolist()
    d = np.asarray(system.rhs, dtype=float).tolist()
    a = np.asarray(system.lower, dtype=float).tolist()
    c = np.asarray(system.upper, dtype=float).tolist()
    n = len(b)
    if len(d) != n or len(a) != n - 1 or len(c) != n - 1:
        raise ValueError("inconsistent tridiagonal system shapes")
    for i in range(1, n):
        piv = b[i - 1]
        if abs(piv) < NEAR_SINGULAR_PIVOT:
            raise ValueError(f"nearly singular pivot {piv!r} at row {i - 1}")
        m = a[i - 1] / piv
        b[i] -= m * c[i - 1]
        d[i] -= m * d[i - 1]
    if abs(b[-1]) < NEAR_SINGULAR_PIVOT:
        raise ValueError(f"nearly singular pivot {b[-1]!r} at row {n - 1}")
    x = [0.0] * n
    x[-1] = d[-1] / b[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (d[i] - c[i] * x[i + 1]) / b[i]
    return np.asarray(x)
