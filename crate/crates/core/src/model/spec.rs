use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::coeff::CoefficientField;
use crate::model::kernel::{JumpKernel, JumpKernelSpec};

/// Diffusion coefficients, jump kernel and dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelSpec {
    pub dim: usize,
    pub coeff: CoefficientField,
    pub kernel: JumpKernelSpec,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    dim: usize,
    coeff: CoefficientField,
    kernel: JumpKernelSpec,
}

impl TryFrom<RawModel> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let mut coeff = raw.coeff;
        coeff.dim = raw.dim;
        ModelSpec::new(coeff, raw.kernel)
    }
}

impl From<ModelSpec> for RawModel {
    fn from(m: ModelSpec) -> Self {
        RawModel { dim: m.dim, coeff: m.coeff, kernel: m.kernel }
    }
}

impl ModelSpec {
    pub fn new(coeff: CoefficientField, kernel: JumpKernelSpec) -> Result<Self> {
        let m = ModelSpec { dim: coeff.dim, coeff, kernel };
        m.coeff.validate_shape()?;
        m.kernel.validate()?;
        Ok(m)
    }

    /// Standard Brownian motion: `a = I`, no jumps.
    pub fn brownian(dim: usize) -> Self {
        ModelSpec::new(CoefficientField::identity(dim), JumpKernelSpec::zero()).expect("valid")
    }

    /// `a = I` with the given kernel.
    pub fn unit_diffusion(dim: usize, kernel: JumpKernelSpec) -> Result<Self> {
        ModelSpec::new(CoefficientField::identity(dim), kernel)
    }

    pub fn jump_kernel(&self) -> JumpKernel {
        JumpKernel::new(self.kernel.clone(), self.dim)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
