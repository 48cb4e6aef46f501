//! Moment functionals of the jump kernel and the small/big jump split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::kernel::{JumpKernel, KernelFamily};
use crate::quadrature::adaptive;

/// Relative tolerance of the radial quadratures.
pub const MOMENT_REL_TOL: f64 = 1e-8;
/// Dyadic shells resolved by quadrature before the near-diagonal closed form.
const DYADIC_SHELLS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `∫_{|h|≤1} |h|² J̃(|h|) dh`.
    pub k1_integral: f64,
    /// Sampled `sup_x ∫_{|x−y|>1} J(x, y) dy`.
    pub k2_tail: f64,
    /// Sampled `K(λ) = sup_x ∫_{|x−y|≤λ} |x−y|² J(x, y) dy`.
    pub k_of_lambda: f64,
    pub lambda: f64,
    pub quadrature_error: f64,
    /// Set when some integral failed to converge; values are then partial.
    pub divergent: bool,
}

/// Base points covering one period of every built-in family.
pub fn base_points(kernel: &JumpKernel) -> Vec<Point> {
    let px = if kernel.spec.family == KernelFamily::ComparabilityViolating { 2.0 } else { 1.0 };
    if kernel.dim == 1 {
        (0..16).map(|i| Point::new1(px * i as f64 / 16.0)).collect()
    } else {
        let nx = if px > 1.0 { 8 } else { 4 };
        (0..nx)
            .flat_map(|i| (0..4).map(move |j| Point::new2(px * i as f64 / nx as f64, j as f64 / 4.0)))
            .collect()
    }
}

/// `∫_{|h|≤λ} |h|² J(x, x+h) dh`: dyadic shells down to `λ·2^{−24}`, then the
/// near-diagonal closed form for the innermost ball.
pub fn local_second_moment(kernel: &JumpKernel, x: &Point, lambda: f64) -> (f64, f64, bool) {
    let (mut total, mut err, mut ok) = (0.0, 0.0, true);
    let mut hi = lambda.min(kernel.support_radius());
    if hi <= 0.0 || kernel.is_zero() {
        return (0.0, 0.0, true);
    }
    for _ in 0..DYADIC_SHELLS {
        let lo = 0.5 * hi;
        let mut seg = vec![lo];
        seg.extend(kernel.radial_breaks(x, lo, hi));
        seg.push(hi);
        let q = adaptive(&seg, hi - lo, MOMENT_REL_TOL, 10, |r| kernel.angular(x, r, 2.0));
        ok &= q.converged;
        total += q.value;
        err += q.error;
        hi = lo;
    }
    let inner = kernel.small_jump_variance(x, hi) * kernel.dim as f64;
    total += inner;
    // The near-diagonal form is exact up to the modulation's variation.
    err += (kernel.envelope_second_moment(0.0, hi) - inner).abs();
    (total, err, ok)
}

pub fn moment_bounds(kernel: &JumpKernel, lambda: f64) -> Result<MomentReport> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} outside (0, 1]")));
    }
    let mut rep = MomentReport {
        k1_integral: kernel.envelope_second_moment(0.0, 1.0),
        k2_tail: 0.0,
        k_of_lambda: 0.0,
        lambda,
        quadrature_error: 0.0,
        divergent: false,
    };
    if kernel.is_zero() {
        return Ok(rep);
    }
    for x in base_points(kernel) {
        let (k, e, ok) = local_second_moment(kernel, &x, lambda);
        let t = kernel.tail_integral(&x, 1.0, MOMENT_REL_TOL);
        rep.divergent |= !ok || !t.converged && !t.error.is_finite() || !t.value.is_finite();
        rep.k_of_lambda = rep.k_of_lambda.max(k);
        rep.k2_tail = rep.k2_tail.max(t.value);
        rep.quadrature_error = rep.quadrature_error.max(e).max(t.error);
    }
    Ok(rep)
}

/// `N(x)` as a constant or a periodic interpolation table.
#[derive(Clone, Debug, PartialEq)]
pub enum ResidualRate {
    Constant(f64),
    /// Samples on a periodic lattice with periods `(px, py)`; (bi)linear
    /// interpolation between samples.
    Table { px: f64, py: f64, nx: usize, ny: usize, values: Vec<f64> },
}

impl ResidualRate {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ResidualRate::Constant(v) => *v,
            ResidualRate::Table { px, py, nx, ny, values } => {
                let u = (x.0[0] / px).rem_euclid(1.0) * *nx as f64;
                let i0 = (u.floor() as usize).min(nx - 1);
                let fu = u - i0 as f64;
                let i1 = (i0 + 1) % nx;
                if *ny == 1 {
                    return values[i0] * (1.0 - fu) + values[i1] * fu;
                }
                let v = (x.0[1] / py).rem_euclid(1.0) * *ny as f64;
                let j0 = (v.floor() as usize).min(ny - 1);
                let fv = v - j0 as f64;
                let j1 = (j0 + 1) % ny;
                let at = |i: usize, j: usize| values[i * ny + j];
                (at(i0, j0) * (1.0 - fu) + at(i1, j0) * fu) * (1.0 - fv) + (at(i0, j1) * (1.0 - fu) + at(i1, j1) * fu) * fv
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            ResidualRate::Constant(v) => *v,
            ResidualRate::Table { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// `J = J₀ + (J − J₀)` with `J₀ = J·1{|x−y| ≤ λ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSplit {
    pub lambda_trunc: f64,
    pub kernel: JumpKernel,
    pub small_kernel: JumpKernel,
    pub residual_rate: ResidualRate,
    pub n_sup: f64,
}

impl KernelSplit {
    /// `N(x) = ∫ (J − J₀)(x, z) dz`.
    pub fn residual(&self, x: &Point) -> f64 {
        self.residual_rate.eval(x)
    }
}

pub fn split_kernel(kernel: &JumpKernel, lambda: f64) -> Result<KernelSplit> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let small_kernel = kernel.with_cut(lambda);
    let residual_rate = if kernel.is_zero() || kernel.support_radius() <= lambda {
        ResidualRate::Constant(0.0)
    } else if kernel.is_homogeneous() {
        ResidualRate::Constant(kernel.tail_integral(&Point::ORIGIN, lambda, MOMENT_REL_TOL).value)
    } else {
        let px = if kernel.spec.family == KernelFamily::ComparabilityViolating { 2.0 } else { 1.0 };
        let (nx, ny, py) = if kernel.dim == 1 { (256 * px as usize, 1, 1.0) } else { (16 * px as usize, 16, 1.0) };
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let x = Point([px * i as f64 / nx as f64, py * j as f64 / ny as f64]);
                values.push(kernel.tail_integral(&x, lambda, 1e-7).value);
            }
        }
        ResidualRate::Table { px, py, nx, ny, values }
    };
    let n_sup = residual_rate.sup();
    if !n_sup.is_finite() {
        return Err(Error::Divergent(format!("residual jump rate beyond {lambda} is not finite")));
    }
    Ok(KernelSplit { lambda_trunc: lambda, kernel: kernel.clone(), small_kernel, residual_rate, n_sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::JumpKernelSpec;

    #[test]
    fn zero_kernel_moments_vanish() {
        let r = moment_bounds(&JumpKernel::new(JumpKernelSpec::zero(), 1), 1.0).unwrap();
        assert_eq!((r.k1_integral, r.k2_tail, r.k_of_lambda), (0.0, 0.0, 0.0));
    }

    #[test]
    fn stable_second_moment_closed_form() {
        // 2∫₀¹ h^{1−α} dh = 2/(2−α) = 4/3 at α = 1/2.
        let r = moment_bounds(&JumpKernel::new(JumpKernelSpec::stable(0.5), 1), 1.0).unwrap();
        assert!((r.k_of_lambda - 4.0 / 3.0).abs() < 1e-8, "{r:?}");
        assert!((r.k1_integral - 4.0 / 3.0).abs() < 1e-12);
        assert!(!r.divergent);
    }

    #[test]
    fn truncated_tail_vanishes() {
        let r = moment_bounds(&JumpKernel::new(JumpKernelSpec::truncated(0.5, 0.5), 1), 1.0).unwrap();
        assert_eq!(r.k2_tail, 0.0);
    }

    #[test]
    fn split_residuals() {
        let s = split_kernel(&JumpKernel::new(JumpKernelSpec::stable(0.5), 1), 0.5).unwrap();
        assert!((s.n_sup - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let t = split_kernel(&JumpKernel::new(JumpKernelSpec::truncated(0.5, 0.4), 1), 0.5).unwrap();
        assert_eq!(t.residual_rate, ResidualRate::Constant(0.0));
        let z = split_kernel(&JumpKernel::new(JumpKernelSpec::zero(), 2), 0.5).unwrap();
        assert_eq!(z.n_sup, 0.0);
    }

    #[test]
    fn modulated_table_interpolates_quadrature() {
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5).with_modulation(0.5, 1.5), 1);
        let s = split_kernel(&k, 0.5).unwrap();
        for x in [0.013, 0.37, 0.9, 1.55] {
            let direct = k.tail_integral(&Point::new1(x), 0.5, 1e-9).value;
            assert!((s.residual(&Point::new1(x)) - direct).abs() < 1e-4 * direct, "x={x}");
        }
    }
}
