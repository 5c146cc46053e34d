"""Finite elements and linear implicit Euler for the stochastic strongly damped wave equation."""
from .errors import SDWaveError
from .experiments import (
    ConvergenceReport,
    ExperimentConfig,
    energy_audit,
    estimate_rates,
    holder_estimate,
    run_deterministic_convergence,
    run_regularity,
    run_spatial_convergence,
    run_temporal_convergence,
)
from .fem import (
    FemFunction,
    Mesh1D,
    SineSeries,
    SpectralDecomp,
    SymTridiagonal,
    assemble_mass,
    assemble_stiffness,
    build_mesh,
    discrete_fractional_norm,
    discrete_l2_norm,
    eval_fem_function,
    l2_project,
    ritz_project,
)
from .linalg import DenseSym, gen_sym_eig, solve_dense, solve_sym_tridiag
from .noise import (
    ModeIncrements,
    QSpec,
    build_q_spec,
    build_sine_load_table,
    coarsen_increments,
    hs_norm_partial,
    increments_to_load,
    sample_mode_increments,
)
from .schemes import (
    FemState,
    ModalState,
    SchemeConfig,
    deterministic_step,
    modal_exact_covariance,
    run_deterministic,
    run_stochastic,
    spectral_exact_linear,
    stochastic_step,
)

__version__ = "0.1.0"
