//! Stationary states, linear stability and real-time dynamics of a 2D
//! condensate in a harmonic trap with balanced gain and loss.

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bdg;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod observables;
pub mod potential;
pub mod stationary;

pub use basis::{build_basis, hermite_function, BasisSet};
pub use error::{Error, Result};
pub use grid::{ComplexField, GridSpec, ScalarField, Spectral, Wavefunction};
pub use potential::{evaluate_imaginary, evaluate_trap, is_pt_symmetric, PotentialKind, PotentialSpec};
pub use stationary::{BranchLabel, SpectrumBranch, StationaryState, SweepParameter};
pub use bdg::{build_bdg_matrix, solve_bdg, stability_sweep, BdgSpectrum};
pub use dynamics::{evolve, offcenter_vortex, precession_experiment, split_step, track_vortex, PropagationConfig, Trajectory};
pub use config::{g_from_physical, load_config, RunConfig};
