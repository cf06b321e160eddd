//! Numerical laboratory for the Peierls–Nabarro reaction-diffusion model with
//! a half-Laplacian: layer solutions, correctors, the limiting particle ODE
//! and the rescaled field evolution whose layers follow it.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases at the crate root fix it to `f64`, which every tolerance in the
//! test suites assumes.

// Parameter checks are written as `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrector;
pub mod error;
pub mod frac_operator;
pub mod grid;
pub mod harness;
pub mod layer;
pub mod linalg;
pub mod particles;
pub mod pde;
pub mod potential;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid = grid::Grid1D<f64>;
pub type Far = grid::FarField<f64>;
pub type Potential = potential::PotentialSpec<f64>;
pub type Stress = potential::StressField<f64>;
pub type IntegralOp = frac_operator::IntegralOperator<f64>;
pub type Layer = layer::LayerProfile<f64>;
pub type Corrector = corrector::CorrectorProfile<f64>;
pub type Particles = particles::ParticleState<f64>;
pub type Trajectory = particles::Trajectory<f64>;
pub type Field = pde::FieldState<f64>;
