//! Nudging-based continuous data assimilation for the 2D incompressible
//! Navier-Stokes equations on the periodic torus.
//!
//! The crate is organized bottom-up:
//!
//! * [`field`]: spectral vector fields, norms, Leray projection, dealiasing.
//! * [`solver`]: BDF2 time stepper with extrapolated skew-symmetric advection.
//! * [`observation`]: observation operators `I_H` and their interpolation constants.
//! * [`control`]: nudging-parameter controllers and the assimilation step.
//! * [`conditions`]: a-priori parameter-condition evaluators and scaling estimates.
//! * [`harness`]: twin experiments, convergence studies and CSV/report output.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the usual double-precision instantiation.

pub mod conditions;
pub mod control;
pub mod error;
pub mod field;
pub mod harness;
pub mod observation;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = field::Grid<f64>;
pub type Field = field::SpectralField<f64>;
pub type Field32 = field::SpectralField<f32>;
pub type Observer = observation::ObservationOperator<f64>;
pub type State = solver::SolverState<f64>;
pub type Record = control::StepRecord<f64>;
