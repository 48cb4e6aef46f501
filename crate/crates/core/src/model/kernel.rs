//! Jump kernel families.
//!
//! Every family has the form `J(x, y) = m(x, y)·shape(x, y)` where the
//! modulation `m(x, y) = c_lo + (c_hi − c_lo)·s((x + y)/2)` lies in
//! `[c_lo, c_hi]` and `s` is a 1-periodic bump with values in `[0, 1]`.
//! Each family is dominated by a radial power-law envelope, which drives
//! thinning, rejection sampling and tail bounds.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, Point};
use crate::quadrature::{adaptive, composite, gl8, Quad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Zero,
    StableLike,
    TruncatedStable,
    MixedIndex,
    ComparabilityViolating,
}

fn one() -> f64 {
    1.0
}

/// Serializable kernel description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpKernelSpec {
    pub family: KernelFamily,
    #[serde(default)]
    pub alpha: f64,
    /// Upper index of the mixed-index family; defaults to `alpha`.
    #[serde(default)]
    pub beta_idx: Option<f64>,
    #[serde(default)]
    pub trunc_radius: Option<f64>,
    #[serde(default = "one")]
    pub c_lo: f64,
    #[serde(default = "one")]
    pub c_hi: f64,
    /// Adds `value·1{x₁ > y₁}`; only for exercising the symmetry validator.
    #[serde(default, skip_serializing_if = "is_zero_f64")]
    pub asym_perturbation: f64,
}

fn is_zero_f64(v: &f64) -> bool {
    *v == 0.0
}

impl JumpKernelSpec {
    pub fn zero() -> Self {
        JumpKernelSpec {
            family: KernelFamily::Zero,
            alpha: 0.0,
            beta_idx: None,
            trunc_radius: None,
            c_lo: 1.0,
            c_hi: 1.0,
            asym_perturbation: 0.0,
        }
    }

    pub fn stable(alpha: f64) -> Self {
        JumpKernelSpec { family: KernelFamily::StableLike, alpha, ..Self::zero() }
    }

    pub fn truncated(alpha: f64, radius: f64) -> Self {
        JumpKernelSpec { family: KernelFamily::TruncatedStable, alpha, trunc_radius: Some(radius), ..Self::zero() }
    }

    pub fn mixed(alpha: f64, beta: f64) -> Self {
        JumpKernelSpec { family: KernelFamily::MixedIndex, alpha, beta_idx: Some(beta), ..Self::zero() }
    }

    pub fn violating(alpha: f64) -> Self {
        JumpKernelSpec { family: KernelFamily::ComparabilityViolating, alpha, ..Self::zero() }
    }

    pub fn with_modulation(mut self, c_lo: f64, c_hi: f64) -> Self {
        self.c_lo = c_lo;
        self.c_hi = c_hi;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta_idx.unwrap_or(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == KernelFamily::Zero {
            return Ok(());
        }
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha {} outside (0, 2)", self.alpha));
        }
        if self.family == KernelFamily::MixedIndex {
            let b = self.beta();
            if !(b >= self.alpha && b < 2.0) {
                return bad(format!("beta_idx {b} must lie in [alpha, 2)"));
            }
        }
        if self.family == KernelFamily::TruncatedStable && !self.trunc_radius.is_some_and(|r| r > 0.0) {
            return bad("truncated-stable needs a positive trunc_radius".into());
        }
        if !(self.c_lo > 0.0 && self.c_hi >= self.c_lo && self.c_hi.is_finite()) {
            return bad(format!("need 0 < c_lo ≤ c_hi, got {} and {}", self.c_lo, self.c_hi));
        }
        if !self.asym_perturbation.is_finite() {
            return bad("perturbation must be finite".into());
        }
        Ok(())
    }
}

/// One envelope component `coef·r^{−d−gamma}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerTerm {
    pub coef: f64,
    pub gamma: f64,
}

/// Evaluable kernel in a fixed dimension, optionally cut at a radius
/// (the small-jump kernel `J₀ = J·1{|x−y| ≤ cut}`).
#[derive(Clone, Debug, PartialEq)]
pub struct JumpKernel {
    pub spec: JumpKernelSpec,
    pub dim: usize,
    pub cut: f64,
}

#[inline]
fn bump(z: &Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        s += 0.5 * (1.0 + (2.0 * PI * z.0[i]).cos());
    }
    s / dim as f64
}

#[inline]
fn cell_sign(x: &Point) -> f64 {
    if (x.0[0].floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

impl JumpKernel {
    pub fn new(spec: JumpKernelSpec, dim: usize) -> Self {
        JumpKernel { spec, dim, cut: f64::INFINITY }
    }

    /// Same kernel restricted to jumps of size at most `cut`.
    pub fn with_cut(&self, cut: f64) -> Self {
        JumpKernel { cut: cut.min(self.cut), ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.spec.family == KernelFamily::Zero && self.spec.asym_perturbation == 0.0
    }

    /// Whether the modulation is constant, making radial integrals closed form.
    pub fn is_homogeneous(&self) -> bool {
        self.spec.c_lo == self.spec.c_hi
            && matches!(self.spec.family, KernelFamily::Zero | KernelFamily::StableLike | KernelFamily::TruncatedStable)
            && self.spec.asym_perturbation == 0.0
    }

    /// Radius beyond which the kernel vanishes.
    pub fn support_radius(&self) -> f64 {
        let t = match self.spec.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TruncatedStable => self.spec.trunc_radius.unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        };
        t.min(self.cut)
    }

    #[inline]
    fn modulation(&self, mid: &Point) -> f64 {
        let s = &self.spec;
        if s.c_lo == s.c_hi {
            s.c_lo
        } else {
            s.c_lo + (s.c_hi - s.c_lo) * bump(mid, self.dim)
        }
    }

    #[inline]
    fn power(&self, r: f64, gamma: f64) -> f64 {
        match self.dim {
            1 => r.powf(-1.0 - gamma),
            _ => r.powf(-2.0 - gamma),
        }
    }

    /// `J(x, y)`; zero on the diagonal.
    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        let pert = if self.spec.asym_perturbation != 0.0 && x.0[0] > y.0[0] {
            self.spec.asym_perturbation
        } else {
            0.0
        };
        let h = *y - *x;
        let r = h.norm();
        if r == 0.0 || r > self.support_radius() {
            return pert;
        }
        let s = &self.spec;
        let mid = x.midpoint(y);
        let base = match s.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::StableLike | KernelFamily::TruncatedStable => self.modulation(&mid) * self.power(r, s.alpha),
            KernelFamily::MixedIndex => {
                let w = bump(&(mid + Point([0.25, 0.25])), self.dim);
                self.modulation(&mid) * (w * self.power(r, s.alpha) + (1.0 - w) * self.power(r, s.beta()))
            }
            KernelFamily::ComparabilityViolating => {
                // Half-space cones whose axis is ±e₁ by parity of ⌊x₁⌋, symmetrized.
                let fwd = (h.0[0] * cell_sign(x) > 0.0) as u8 as f64;
                let back = (-h.0[0] * cell_sign(y) > 0.0) as u8 as f64;
                self.modulation(&mid) * self.power(r, s.alpha) * 0.5 * (fwd + back)
            }
        };
        base + pert
    }

    /// Radial envelope components dominating `J` (perturbation excluded).
    pub fn envelope_terms(&self) -> Vec<PowerTerm> {
        let s = &self.spec;
        match s.family {
            KernelFamily::Zero => vec![],
            KernelFamily::MixedIndex if s.beta() != s.alpha => vec![
                PowerTerm { coef: s.c_hi, gamma: s.alpha },
                PowerTerm { coef: s.c_hi, gamma: s.beta() },
            ],
            _ => vec![PowerTerm { coef: s.c_hi, gamma: s.alpha }],
        }
    }

    /// Declared radial majorant `J̃(r)`.
    pub fn envelope(&self, r: f64) -> f64 {
        if r <= 0.0 || r > self.support_radius() {
            return 0.0;
        }
        self.envelope_terms().iter().map(|t| t.coef * self.power(r, t.gamma)).sum()
    }

    /// Envelope rate of jumps with size in `(a, b]`.
    pub fn envelope_mass(&self, a: f64, b: f64) -> f64 {
        let b = b.min(self.support_radius());
        if b <= a {
            return 0.0;
        }
        let sd = unit_sphere_area(self.dim);
        self.envelope_terms()
            .iter()
            .map(|t| sd * t.coef * (a.powf(-t.gamma) - if b.is_finite() { b.powf(-t.gamma) } else { 0.0 }) / t.gamma)
            .sum()
    }

    /// `∫_{a<|h|≤b} |h|² J̃(|h|) dh` in closed form.
    pub fn envelope_second_moment(&self, a: f64, b: f64) -> f64 {
        let b = b.min(self.support_radius());
        if b <= a {
            return 0.0;
        }
        let sd = unit_sphere_area(self.dim);
        self.envelope_terms()
            .iter()
            .map(|t| sd * t.coef * (b.powf(2.0 - t.gamma) - a.powf(2.0 - t.gamma)) / (2.0 - t.gamma))
            .sum()
    }

    /// Per-coordinate variance rate of the jumps smaller than `delta` at `x`,
    /// `(1/d)·∫_{|h|<δ} |h|² J(x, x+h) dh`, using the near-diagonal form of `J`.
    pub fn small_jump_variance(&self, x: &Point, delta: f64) -> f64 {
        let s = &self.spec;
        let b = delta.min(self.support_radius());
        if b <= 0.0 || s.family == KernelFamily::Zero {
            return 0.0;
        }
        let sd = unit_sphere_area(self.dim);
        let mom = |g: f64| sd * b.powf(2.0 - g) / (2.0 - g);
        let m = self.modulation(x);
        let v = match s.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::StableLike | KernelFamily::TruncatedStable => m * mom(s.alpha),
            KernelFamily::MixedIndex => {
                let w = bump(&(*x + Point([0.25, 0.25])), self.dim);
                m * (w * mom(s.alpha) + (1.0 - w) * mom(s.beta()))
            }
            KernelFamily::ComparabilityViolating => 0.5 * m * mom(s.alpha),
        };
        v / self.dim as f64
    }

    /// Draws a displacement from the normalized envelope on `a < |h| ≤ b`.
    pub fn sample_envelope<R: Rng + ?Sized>(&self, a: f64, b: f64, rng: &mut R) -> Point {
        let b = b.min(self.support_radius());
        let terms = self.envelope_terms();
        let sd = unit_sphere_area(self.dim);
        let tail = |g: f64| if b.is_finite() { b.powf(-g) } else { 0.0 };
        let masses: Vec<f64> = terms
            .iter()
            .map(|t| sd * t.coef * (a.powf(-t.gamma) - tail(t.gamma)) / t.gamma)
            .collect();
        let total: f64 = masses.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut g = terms[terms.len() - 1].gamma;
        for (t, m) in terms.iter().zip(&masses) {
            if pick < *m {
                g = t.gamma;
                break;
            }
            pick -= m;
        }
        let u: f64 = rng.random();
        let lo = a.powf(-g);
        let r = (lo - u * (lo - tail(g))).powf(-1.0 / g);
        self.direction(r, rng)
    }

    fn direction<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> Point {
        if self.dim == 1 {
            if rng.random::<bool>() {
                Point::new1(r)
            } else {
                Point::new1(-r)
            }
        } else {
            let th = 2.0 * PI * rng.random::<f64>();
            Point::new2(r * th.cos(), r * th.sin())
        }
    }

    /// Radii in `(lo, hi)` where `r ↦ J(x, x ± r e₁)` may jump.
    pub(crate) fn radial_breaks(&self, x: &Point, lo: f64, hi: f64) -> Vec<f64> {
        let mut b = vec![];
        let sup = self.support_radius();
        if sup > lo && sup < hi {
            b.push(sup);
        }
        if self.spec.family == KernelFamily::ComparabilityViolating && self.dim == 1 {
            let top = hi.min(64.0);
            let mut k = (x.0[0] - top).floor();
            while k <= x.0[0] + top + 1.0 {
                let r = (k - x.0[0]).abs();
                if r > lo && r < hi {
                    b.push(r);
                }
                k += 1.0;
            }
        }
        b.sort_by(|a, b| a.total_cmp(b));
        b.dedup();
        b
    }

    /// `r ↦ r^{d−1}∫_{S^{d−1}} |h|^p J(x, x + rθ) dθ`.
    pub(crate) fn angular(&self, x: &Point, r: f64, p: f64) -> f64 {
        let w = r.powf(p);
        if self.dim == 1 {
            return w * (self.eval(x, &(*x + Point::new1(r))) + self.eval(x, &(*x - Point::new1(r))));
        }
        let panels = ((2.0 * PI * r / 0.5).ceil() as usize).clamp(4, 64);
        let bounds: Vec<f64> = (0..=panels).map(|k| 2.0 * PI * k as f64 / panels as f64).collect();
        w * r * composite(gl8(), &bounds, f64::INFINITY, |th| {
            self.eval(x, &(*x + Point::new2(r * th.cos(), r * th.sin())))
        })
    }

    /// `∫_{lo<|h|≤hi} |h|^p J(x, x+h) dh` over a bounded shell, adaptive.
    pub fn shell_integral(&self, x: &Point, lo: f64, hi: f64, p: f64, rel_tol: f64) -> Quad {
        let hi = hi.min(self.support_radius());
        if hi <= lo || self.is_zero() {
            return Quad { value: 0.0, error: 0.0, converged: true };
        }
        let mut breaks = vec![lo];
        breaks.extend(self.radial_breaks(x, lo, hi));
        breaks.push(hi);
        let width = if self.dim == 1 { 0.25 } else { 0.5 };
        let max_level = if self.dim == 1 { 8 } else { 3 };
        adaptive(&breaks, width, rel_tol, max_level, |r| self.angular(x, r, p))
    }

    /// Period-averaged envelope shape factor used for the far tail.
    fn tail_average_factor(&self) -> f64 {
        let s = &self.spec;
        let mean_m = 0.5 * (s.c_lo + s.c_hi);
        match s.family {
            KernelFamily::ComparabilityViolating => 0.5 * mean_m,
            // The weight w has mean 1/2 and is uncorrelated with m.
            KernelFamily::MixedIndex if s.beta() != s.alpha => 0.5 * mean_m,
            _ => mean_m,
        }
    }

    /// Period-averaged mass of jumps longer than `lo`; accurate for `lo`
    /// large compared with the modulation period.
    pub fn far_tail(&self, lo: f64) -> f64 {
        let sup = self.support_radius();
        if self.is_zero() || sup <= lo {
            return 0.0;
        }
        if self.is_homogeneous() {
            return self.spec.c_lo / self.spec.c_hi * self.envelope_mass(lo, sup);
        }
        self.tail_average_factor() / self.spec.c_hi * self.envelope_mass(lo, sup)
    }

    /// `∫_{|h|>lo} J(x, x+h) dh`: adaptive quadrature up to a finite radius
    /// and the period-averaged power-law tail beyond it.
    pub fn tail_integral(&self, x: &Point, lo: f64, rel_tol: f64) -> Quad {
        if self.is_zero() {
            return Quad { value: 0.0, error: 0.0, converged: true };
        }
        if self.spec.asym_perturbation != 0.0 {
            return Quad { value: f64::INFINITY, error: f64::INFINITY, converged: false };
        }
        let sup = self.support_radius();
        if self.is_homogeneous() {
            let v = self.spec.c_lo / self.spec.c_hi * self.envelope_mass(lo, sup);
            return Quad { value: v, error: 0.0, converged: true };
        }
        let r_num: f64 = if self.dim == 1 { 64.0 } else { 4.0 };
        let top = sup.min(r_num.max(2.0 * lo));
        let mut q = self.shell_integral(x, lo, top, 0.0, rel_tol);
        if sup > top {
            let sd = unit_sphere_area(self.dim);
            let f = self.tail_average_factor();
            let (mut tail, mut err) = (0.0, 0.0);
            for t in self.envelope_terms() {
                tail += f * sd * top.powf(-t.gamma) / t.gamma * (t.coef / self.spec.c_hi);
                err += sd * self.spec.c_hi * top.powf(-1.0 - t.gamma) * (t.coef / self.spec.c_hi);
            }
            q.value += tail;
            q.error += err;
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn stable_kernel_is_symmetric_power_law() {
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5).with_modulation(0.5, 2.0), 2);
        let x = Point::new2(0.1, 0.7);
        let y = Point::new2(-0.4, 1.3);
        assert_eq!(k.eval(&x, &y), k.eval(&y, &x));
        let m = k.eval(&x, &y) * x.dist(&y).powf(2.5);
        assert!((0.5..=2.0).contains(&m));
    }

    #[test]
    fn violating_kernel_blocks_cross_cell_direction() {
        let k = JumpKernel::new(JumpKernelSpec::violating(0.5), 1);
        // x in odd cell [-1, 0), z in even cell to the right.
        assert_eq!(k.eval(&Point::new1(-0.2), &Point::new1(0.7)), 0.0);
        assert!(k.eval(&Point::new1(0.2), &Point::new1(0.7)) > 0.0);
        assert!(k.eval(&Point::new1(0.7), &Point::new1(-0.2)) == 0.0);
    }

    #[test]
    fn envelope_dominates_all_families() {
        let specs = [
            JumpKernelSpec::stable(0.7).with_modulation(0.3, 1.7),
            JumpKernelSpec::mixed(0.4, 1.6).with_modulation(0.3, 1.7),
            JumpKernelSpec::violating(1.2).with_modulation(0.5, 1.0),
            JumpKernelSpec::truncated(1.5, 0.8),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for spec in specs {
            for dim in 1..=2 {
                let k = JumpKernel::new(spec.clone(), dim);
                for _ in 0..2000 {
                    let x = Point([rng.random_range(-3.0..3.0), if dim == 2 { rng.random_range(-3.0..3.0) } else { 0.0 }]);
                    let y = Point([rng.random_range(-3.0..3.0), if dim == 2 { rng.random_range(-3.0..3.0) } else { 0.0 }]);
                    let r = x.dist(&y);
                    assert!(k.eval(&x, &y) <= k.envelope(r) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn homogeneous_tail_closed_form() {
        // 2∫_{1/2}^∞ h^{-3/2} dh = 4√2.
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5), 1);
        let q = k.tail_integral(&Point::ORIGIN, 0.5, 1e-10);
        assert!((q.value - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn modulated_tail_quadrature_close_to_average() {
        // For modulation in [1/2, 3/2] with mean 1 the tail mass lies between
        // the envelope masses scaled by c_lo and c_hi.
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5).with_modulation(0.5, 1.5), 1);
        let q = k.tail_integral(&Point::new1(0.3), 0.5, 1e-9);
        let unit = 4.0 * 2f64.sqrt();
        assert!(q.value > 0.5 * unit && q.value < 1.5 * unit, "{q:?}");
        assert!(q.error < 1e-2, "{q:?}");
    }

    #[test]
    fn shell_integral_matches_power_law() {
        // ∫_{1/4<|h|<1} J dh for J = |h|^{-2-α} in 2D: 2π(4^α − 1)/α.
        let k = JumpKernel::new(JumpKernelSpec::stable(1.0), 2);
        let q = k.shell_integral(&Point::new2(0.2, 0.1), 0.25, 1.0, 0.0, 1e-10);
        assert!((q.value - 2.0 * PI * 3.0).abs() < 1e-8, "{q:?}");
    }
}
