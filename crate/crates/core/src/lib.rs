//! Coupled-dipole simulation of two-level atoms in a single-mode
//! one-dimensional waveguide.
//!
//! Rates are in units of γ_w and lengths in units of λ unless a
//! [`WaveguideParams`] says otherwise. Transmission and reflection
//! amplitudes everywhere have the free-propagation phase removed: `t` is the
//! ratio of transmitted to incident amplitude as if the array had zero
//! length, and `r` is referred to the coordinate origin.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod dynamics;
pub mod eigenmodes;
pub mod error;
pub mod model;
mod ode;
pub mod search;
pub mod steady_state;
pub mod stochastic;
pub mod storage;
pub mod table;
pub mod transfer_matrix;

pub use dynamics::{
    evolve, total_excitation, DetuningSchedule, DriveSchedule, EvolveSettings, PiecewiseLinear,
    Trajectory,
};
pub use eigenmodes::{
    canonical_basis_wavelength_lattice, classify, decompose, decompose_matrix, difference_basis,
    half_wave_sign_map, mode_weights, EigenmodeSet, Mode, ModeClass, SignMap,
};
pub use error::{Error, Result, TotalReflection};
pub use model::{
    build_evolution_matrix, derive_gamma_w, drive_vector, eta, green_function, polarizability,
    AtomArray, DipoleCouplingInputs, DriveField, LatticeSpec, PolarizationVector, WaveguideParams,
};
pub use steady_state::{
    scattering_coefficients, solve_steady, spectrum, steady_state_residual, total_field,
    DetuningGrid, ScatteringCoefficients, SpectrumTable,
};
pub use stochastic::{
    depth_from_rms, ensemble_spectrum, rms_from_depth, sample_positions, EnsembleResult,
    LatticeDepthSpec, PositionModel, RealizationFailure,
};
pub use storage::{
    check_inverse_sum, project_two_mode, run_storage_protocol, two_mode_evolve, StorageConfig,
    StorageRun, TwoModeModel, TwoModeState, TwoModeTrajectory,
};
pub use transfer_matrix::{
    atom_matrix, cascade, corrected_line_shift, corrected_optical_thickness, lattice_t, line_shift,
    mft_t, optical_thickness_approx, propagation_matrix, recurrent_series, single_atom_scattering,
    transmission_from_matrix, two_atom_t, RecurrentSeries, SingleAtomScattering, TransferMatrix,
};
