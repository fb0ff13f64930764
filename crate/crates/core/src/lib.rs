//! Simulation of entropy transfer from a three-level emitter to a coherent
//! cavity field in a lossless single-mode cavity.
//!
//! The crate provides:
//!
//! - [`hilbert`]: truncated Fock-space linear algebra (states, operators,
//!   tensor products, partial traces, coherent states, displacement),
//! - [`dynamics`]: master-equation propagation with spontaneous emission into
//!   free space, including the purified evolution over an auxiliary copy of
//!   the emitter,
//! - [`steady_state`]: closed-form equilibrium cavity states, conditional
//!   fidelities (finite photon number and thermodynamic limit), and the
//!   phase-scrambling heuristic,
//! - [`infotheory`]: von Neumann/Shannon entropies, Uhlmann fidelity, Husimi
//!   Q-functions, quantum and measurement-based mutual information, and
//!   reservoir entropy bookkeeping,
//! - [`bayes`]: click/no-click inference on the displaced cavity state.
//!
//! All numerical kernels are generic over the scalar type through the
//! [`Scalar`] trait (`f32` or `f64`); concrete aliases for the common types
//! live at the crate root. Everything is immutable after construction and
//! safe to share across threads.

// Guards written as `!(x > 0)` deliberately treat NaN as invalid input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod infotheory;
pub mod scalar;
pub mod steady_state;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Ket64 = hilbert::Ket<f64>;
pub type Ket32 = hilbert::Ket<f32>;
pub type DensityMatrix64 = hilbert::DensityMatrix<f64>;
pub type DensityMatrix32 = hilbert::DensityMatrix<f32>;
pub type OperatorMatrix64 = hilbert::OperatorMatrix<f64>;
pub type OperatorMatrix32 = hilbert::OperatorMatrix<f32>;
pub type ModelParams64 = dynamics::ModelParams<f64>;
pub type ModelParams32 = dynamics::ModelParams<f32>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type QGrid64 = infotheory::QGrid<f64>;
pub type SteadyStateInputs64 = steady_state::SteadyStateInputs<f64>;
