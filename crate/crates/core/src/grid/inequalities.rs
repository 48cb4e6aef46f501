//! Nash and weighted Poincaré ratios on random test functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DiscreteGenerator;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Gaussian bump modulated by a piecewise-linear profile along a random
/// direction: `f(x) = e^{−|x−c|²/(2w²)}·(1 + ½·ℓ((x−c)·e/w))`, with `ℓ`
/// interpolating values in `[−1, 1]` at unit-spaced knots on `[−3, 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Point,
    pub width: f64,
    pub direction: Point,
    pub knots: Vec<f64>,
}

impl TestFunction {
    /// Center uniform in the ball of radius `spread`, width in `[0.25, 1]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, spread: f64, rng: &mut R) -> Self {
        let mut center = Point::ORIGIN;
        loop {
            for k in 0..dim {
                center.0[k] = rng.random_range(-spread..=spread);
            }
            if center.norm() <= spread {
                break;
            }
        }
        let direction = if dim == 1 {
            Point::new1(1.0)
        } else {
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            Point::new2(t.cos(), t.sin())
        };
        TestFunction {
            center,
            width: rng.random_range(0.25..=1.0),
            direction,
            knots: (0..7).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let d = *x - self.center;
        let s = (d.dot(&self.direction) / self.width).clamp(-3.0, 3.0) + 3.0;
        let k = (s.floor() as usize).min(self.knots.len() - 2);
        let f = s - k as f64;
        let profile = self.knots[k] * (1.0 - f) + self.knots[k + 1] * f;
        (-d.norm2() / (2.0 * self.width * self.width)).exp() * (1.0 + 0.5 * profile)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSweep {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub skipped: usize,
}

fn sweep(ratios: Vec<Option<f64>>) -> RatioSweep {
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    RatioSweep { max_ratio: ratios.iter().copied().fold(0.0, f64::max), ratios, skipped }
}

/// `max_f ‖f‖₂^{2(1+2/d)} / (ℰ_h(f, f)·‖f‖₁^{4/d})` over `trials` random bumps
/// centred within half the box.
pub fn nash_ratio<R: Rng + ?Sized>(gen: &DiscreteGenerator, trials: usize, rng: &mut R) -> Result<RatioSweep> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let d = gen.dim() as f64;
    let v = gen.grid.cell_volume();
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let tf = TestFunction::random(gen.dim(), 0.5 * gen.grid.extent - 2.0, rng);
        let f: Vec<f64> = gen.nodes.iter().map(|x| tf.eval(x)).collect();
        let l1: f64 = v * f.iter().map(|x| x.abs()).sum::<f64>();
        let l2sq: f64 = v * f.iter().map(|x| x * x).sum::<f64>();
        let e = gen.energy(&f);
        if !(e > 0.0) {
            return Err(Error::Estimator("zero energy for a nonconstant test function".into()));
        }
        out.push(Some(l2sq.powf(1.0 + 2.0 / d) / (e * l1.powf(4.0 / d))));
    }
    Ok(sweep(out))
}

fn phi(x: &Point, x0: &Point, r: f64) -> f64 {
    let s = (1.0 - x.dist(x0) / r).max(0.0);
    s * s
}

/// `∫|f − f̄|²φ_R / (R²∫|∇f|²φ_R)` with `f̄` the `φ_R`-weighted mean, the
/// gradient by forward differences and `φ_R` sampled at edge midpoints.
pub fn poincare_quotient(gen: &DiscreteGenerator, f: &[f64], x0: &Point, r: f64) -> Option<f64> {
    let w: Vec<f64> = gen.nodes.iter().map(|x| phi(x, x0, r)).collect();
    let mass: f64 = w.iter().sum();
    let mean = w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / mass;
    let num: f64 = w.iter().zip(f).map(|(a, b)| a * (b - mean) * (b - mean)).sum();
    let h = gen.grid.h;
    let mut den = 0.0;
    for e in &gen.local_edges {
        let (i, j) = (e.i as usize, e.j as usize);
        let d = gen.grid.displacement(&gen.nodes[i], &gen.nodes[j]);
        let mid = gen.nodes[i] + d * 0.5;
        let g = (f[j] - f[i]) / h;
        den += phi(&mid, x0, r) * g * g;
    }
    (den > 0.0 && num.is_finite()).then(|| num / (r * r * den))
}

/// Maximum of [`poincare_quotient`] over random test functions placed on
/// the scale of the ball, `f(x) = g((x − x0)/R)`.
pub fn weighted_poincare_ratio<R: Rng + ?Sized>(
    gen: &DiscreteGenerator,
    x0: &Point,
    r: f64,
    trials: usize,
    rng: &mut R,
) -> Result<RatioSweep> {
    if trials == 0 || !(r > 0.0) {
        return Err(Error::InvalidInput("need trials ≥ 1 and R > 0".into()));
    }
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let tf = TestFunction::random(gen.dim(), 0.5, rng);
        let f: Vec<f64> = gen.nodes.iter().map(|x| tf.eval(&((*x - *x0) * (1.0 / r)))).collect();
        out.push(poincare_quotient(gen, &f, x0, r));
    }
    Ok(sweep(out))
}
