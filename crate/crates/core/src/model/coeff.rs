use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoeffFamily {
    /// `params`: `d` diagonal entries, or `d²` entries of a full matrix (row-major).
    Constant,
    /// `params`: `[base, amplitude, period]`; `a_ii(x) = base + amplitude·sin(2π x_i / period)`.
    SmoothPeriodic,
    /// `params`: `[low, high, cell]`; `a(x) = low·I` on even cells, `high·I` on odd cells.
    Checkerboard,
}

/// Diffusion coefficient field `a(x)` with declared ellipticity constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientField {
    pub family: CoeffFamily,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub dim: usize,
    /// Declared Λ ≥ 1.
    pub lambda: f64,
}

/// Symmetric (in the valid case) 2×2 matrix; only the leading `dim` block is used.
pub type Mat2 = [[f64; 2]; 2];

impl CoefficientField {
    pub fn identity(dim: usize) -> Self {
        CoefficientField { family: CoeffFamily::Constant, params: vec![1.0; dim], dim, lambda: 1.0 }
    }

    pub fn constant_diag(diag: &[f64], lambda: f64) -> Self {
        CoefficientField { family: CoeffFamily::Constant, params: diag.to_vec(), dim: diag.len(), lambda }
    }

    pub fn validate_shape(&self) -> Result<()> {
        let d = self.dim;
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidInput(format!("dimension {d} not in {{1, 2}}")));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::InvalidInput(format!("declared ellipticity {} below 1", self.lambda)));
        }
        let ok = match self.family {
            CoeffFamily::Constant => self.params.len() == d || self.params.len() == d * d,
            CoeffFamily::SmoothPeriodic | CoeffFamily::Checkerboard => self.params.len() == 3,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "{:?} coefficients expect different parameter count, got {}",
                self.family,
                self.params.len()
            )));
        }
        if let CoeffFamily::SmoothPeriodic | CoeffFamily::Checkerboard = self.family {
            if !(self.params[2] > 0.0) {
                return Err(Error::InvalidInput("period/cell must be positive".into()));
            }
        }
        Ok(())
    }

    /// `a(x)`, not checked for symmetry.
    pub fn matrix(&self, x: &Point) -> Mat2 {
        let d = self.dim;
        let mut a = [[0.0; 2]; 2];
        match self.family {
            CoeffFamily::Constant => {
                if self.params.len() == d * d && d > 1 {
                    for i in 0..d {
                        for j in 0..d {
                            a[i][j] = self.params[i * d + j];
                        }
                    }
                } else {
                    for i in 0..d {
                        a[i][i] = self.params[i];
                    }
                }
            }
            CoeffFamily::SmoothPeriodic => {
                let (base, amp, period) = (self.params[0], self.params[1], self.params[2]);
                for i in 0..d {
                    a[i][i] = base + amp * (2.0 * PI * x.0[i] / period).sin();
                }
            }
            CoeffFamily::Checkerboard => {
                let v = self.checker_value(x);
                for i in 0..d {
                    a[i][i] = v;
                }
            }
        }
        a
    }

    fn checker_value(&self, x: &Point) -> f64 {
        let (lo, hi, cell) = (self.params[0], self.params[1], self.params[2]);
        let parity: i64 = (0..self.dim).map(|i| (x.0[i] / cell).floor() as i64).sum();
        if parity.rem_euclid(2) == 0 {
            lo
        } else {
            hi
        }
    }

    /// Whether `a(x)` is diagonal everywhere.
    pub fn is_diagonal(&self) -> bool {
        if self.family == CoeffFamily::Constant && self.dim == 2 && self.params.len() == 4 {
            self.params[1] == 0.0 && self.params[2] == 0.0
        } else {
            true
        }
    }

    /// Whether the field is differentiable, so that continuous-space stepping applies.
    pub fn is_smooth(&self) -> bool {
        self.family != CoeffFamily::Checkerboard
    }

    /// Itô drift of the divergence-form generator `½∇·(a∇)`: `b_j = ½ Σ_i ∂_i a_ij`.
    pub fn drift(&self, x: &Point) -> Point {
        match self.family {
            CoeffFamily::SmoothPeriodic => {
                let (amp, period) = (self.params[1], self.params[2]);
                let k = 2.0 * PI / period;
                let mut b = [0.0; 2];
                for (j, bj) in b.iter_mut().enumerate().take(self.dim) {
                    *bj = 0.5 * amp * k * (k * x.0[j]).cos();
                }
                Point(b)
            }
            _ => Point::ORIGIN,
        }
    }

    /// Lower-triangular `σ` with `σσᵀ = a(x)`.
    pub fn sqrt_matrix(&self, x: &Point) -> Mat2 {
        let a = self.matrix(x);
        if self.dim == 1 {
            return [[a[0][0].max(0.0).sqrt(), 0.0], [0.0, 0.0]];
        }
        let l00 = a[0][0].max(0.0).sqrt();
        let l10 = if l00 > 0.0 { a[1][0] / l00 } else { 0.0 };
        let l11 = (a[1][1] - l10 * l10).max(0.0).sqrt();
        [[l00, 0.0], [l10, l11]]
    }
}

/// Eigenvalues (ascending) of the leading `dim` block of a symmetric matrix.
pub fn sym_eigenvalues(a: &Mat2, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let tr = a[0][0] + a[1][1];
    let diff = a[0][0] - a[1][1];
    let disc = (0.25 * diff * diff + a[0][1] * a[0][1]).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_alternates() {
        let c = CoefficientField {
            family: CoeffFamily::Checkerboard,
            params: vec![0.25, 4.0, 1.0],
            dim: 2,
            lambda: 4.0,
        };
        assert_eq!(c.matrix(&Point::new2(0.5, 0.5))[0][0], 0.25);
        assert_eq!(c.matrix(&Point::new2(1.5, 0.5))[1][1], 4.0);
        assert_eq!(c.matrix(&Point::new2(-0.5, 0.5))[0][0], 4.0);
    }

    #[test]
    fn drift_matches_finite_difference() {
        let c = CoefficientField {
            family: CoeffFamily::SmoothPeriodic,
            params: vec![1.0, 0.5, 1.0],
            dim: 2,
            lambda: 2.0,
        };
        let x = Point::new2(0.3, -0.7);
        let eps = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp.0[j] += eps;
            xm.0[j] -= eps;
            let fd = 0.5 * (c.matrix(&xp)[j][j] - c.matrix(&xm)[j][j]) / (2.0 * eps);
            assert!((fd - c.drift(&x).0[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let c = CoefficientField { family: CoeffFamily::Constant, params: vec![2.0, 0.3, 0.3, 0.5], dim: 2, lambda: 3.0 };
        let s = c.sqrt_matrix(&Point::ORIGIN);
        let a = c.matrix(&Point::ORIGIN);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| s[i][k] * s[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-14);
            }
        }
    }
}
