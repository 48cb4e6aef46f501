//! Model definition (coefficients, jump kernels) and the assumption
//! validators.

pub mod coeff;
pub mod kernel;
mod spec;
pub mod validate;
pub mod moments;

pub use coeff::{CoeffFamily, CoefficientField};
pub use kernel::{JumpKernel, JumpKernelSpec, KernelFamily};
pub use spec::ModelSpec;
