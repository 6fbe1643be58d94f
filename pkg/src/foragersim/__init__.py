"""1D forager-exploiter chemotaxis simulator and verification harness."""

from .config import ConfigError, SimConfig, SweepSpec, parse_config, parse_sweep, serialize_config
from .diagnostics import (
    DecayFit,
    DiagnosticsRecord,
    EnergyConfig,
    choose_b,
    csiszar_kullback_check,
    deviation_norms,
    dissipation_quotient_check,
    fit_decay_rate,
    kl_entropy,
    lyapunov_dissipation,
    lyapunov_energy,
    relative_fisher,
    w_bound_check,
    w_sup_bound,
)
from .model import (
    Constant,
    ConstantPlusCosine,
    EquilibriumInfo,
    FieldState,
    FromFile,
    GaussianBump,
    Grid,
    InitialCondition,
    InvariantViolation,
    ModelParams,
    RescaledToMean,
    build_grid,
    equilibrium_from_state,
    equilibrium_w,
    init_state,
    mass_and_mean,
    sample_field,
    stability_margin,
)
from .odebounds import (
    OdiInstance,
    OdiReport,
    bound_pointwise_forcing,
    bound_window_forcing,
    random_odi_instances,
    verification_suite,
    verify_odi_batch,
    verify_odi_bound,
)
from .operators import (
    FaceFluxes,
    TridiagonalSystem,
    assemble_diffusion_system,
    laplacian_neumann,
    taxis_divergence,
    thomas_solve,
    upwind_face_fluxes,
)
from .stepping import StepControl, Trajectory, cfl_dt, imex_step, run_simulation

__all__ = [name for name in dir() if not name.startswith("_")]
