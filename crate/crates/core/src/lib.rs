//! Simulation and numerical verification toolkit for symmetric
//! jump-diffusions: a divergence-form diffusion with a symmetric jump kernel.
//!
//! The crate has four layers:
//! - [`model`]: coefficient fields, jump kernels and assumption validators;
//! - [`pathsim`]: Monte Carlo paths with small jumps and Meyer-inserted big jumps;
//! - [`grid`]: the discrete form on a lattice, semigroup rows, an exact chain
//!   sampler and a harmonic solver with nonlocal boundary data;
//! - [`estimators`]: one verification procedure per estimate, producing
//!   [`estimators::EstimateReport`]s.

// `!(x > 0.0)` is used on purpose to reject NaN together with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod estimators;
pub mod exec;
pub mod geometry;
pub mod grid;
pub mod model;
pub mod pathsim;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Executor;
pub use geometry::{Ball, Point, Region};
pub use model::{CoefficientField, JumpKernel, JumpKernelSpec, ModelSpec};
pub use rng::RngPlan;
