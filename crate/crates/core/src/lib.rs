//! Time-filtered backward Euler solver for two-dimensional periodic
//! incompressible magnetohydrodynamics.
//!
//! Fields are represented by Fourier–Galerkin truncations on a square
//! periodic grid; the Leray projector keeps velocity and magnetic field
//! exactly divergence-free and the two-thirds rule makes the quadratic
//! terms Galerkin-exact, so the scheme's discrete energy and
//! cross-helicity balances hold to solver tolerance.
//!
//! Row loops run on rayon with the default `parallel` feature; build with
//! `--no-default-features` for a purely sequential library.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod mhd;
pub mod par;
pub mod stepper;
pub mod verify;

pub use diagnostics::{DiagRecord, DiagTracker};
pub use error::{MhdError, Result};
pub use field::{dealiased_product, inner_product, ScalarField, VectorField2};
pub use grid::Grid;
pub use harness::{ConvergenceRow, ExperimentKind, LemmaKind, RunConfig, Startup};
pub use mhd::{Forcing, ManufacturedSolution, NoForcing, SolverParams};
pub use stepper::{Formulation, StateHistory, StepReport};
