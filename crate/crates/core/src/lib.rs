//! Viscosity solutions of `phi_t + H(grad phi) = 0` with convex `H`, admissible
//! shock velocities, and the coalescing particle flow they generate.
//!
//! Every solver is generic over [`scalar::Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissible;
pub mod ball;
pub mod bench;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod hopf_lax;
pub mod hull;
pub mod initial;
pub mod legendre;
pub mod linalg;
pub mod scalar;
pub mod stochastic;
pub mod superdiff;
pub mod vector;
pub mod viscous;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Vec64 = vector::Vector<f64>;
pub type Model64 = legendre::HamiltonianModel<f64>;
pub type Initial64 = initial::InitialCondition<f64>;
pub type LimitSet64 = superdiff::LimitMomentumSet<f64>;
pub type Admissible64 = admissible::AdmissibleSolution<f64>;
pub type Trajectory64 = flow::ParticleTrajectory<f64>;
pub type Field64 = viscous::GridField<f64>;
pub type Series64 = viscous::FieldSeries<f64>;
pub type Ensemble64 = stochastic::SdeEnsemble<f64>;
