//! Relaxation of dephased spin-1/2 chains and the Mpemba effect.
//!
//! The pipeline runs from a fixed-magnetization [`SectorBasis`], through the
//! J1–J2 XXZ Hamiltonian and Gibbs initial states, to Lindblad evolution of
//! the distance `D(t) = Tr[(ρ(t) − ρ_ss)²]` and the detection of trajectory
//! crossings.
//!
//! ```
//! use mpemba_core::{Boundary, HamiltonianSpec, SectorBasis, build_hamiltonian};
//!
//! let basis = SectorBasis::new(2, 1).unwrap();
//! let mut h = build_hamiltonian(&HamiltonianSpec::xxz(2, 1.0, Boundary::Open), &basis).unwrap();
//! h.eigendecompose().unwrap();
//! assert!((h.energies().unwrap()[0] + 0.25).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod liouvillian;
pub mod mpemba;
pub mod propagation;
pub mod sector_basis;
pub mod thermal;

pub use error::{Error, Result};
pub use hamiltonian::{build_hamiltonian, Boundary, Eigensystem, HamiltonianSpec, HermitianOperator};
pub use io::{parse_config, RunConfig};
pub use liouvillian::{
    apply_lindblad_rhs, build_superoperator, liouvillian_eigenvalues, spectral_decomposition, DissipationSpec,
    Dissipator, LiouvillianSpectrum,
};
pub use mpemba::{
    classify_qme, delta_window_sweep, detect_crossing, j1j2_sweep, overlap_spectrum, CrossingReport, ModelPoint,
    OverlapSpectrum, PreparedModel, QmeClass, QmeVerdict,
};
pub use propagation::{
    distance, evolve_integrate, evolve_spectral, late_time_rate, Dynamics, GridSpec, IntegratorOptions, Method,
    TimeGrid, Trajectory,
};
pub use sector_basis::{SectorBasis, SparseOperator};
pub use thermal::{purity_and_diagnostics, thermal_state, DensityMatrix, TemperatureSpec};

/// Complex scalar used for density matrices and Liouvillian modes.
pub use num_complex::Complex64 as C64;
