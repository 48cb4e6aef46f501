//! Gauss–Legendre rules, composite and adaptive panel integration, and
//! dyadic shells for integrable singularities at the origin.

use std::sync::OnceLock;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on [−1, 1], nodes by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        h * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
    }
}

pub fn gl8() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(8))
}

pub fn gl16() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(16))
}

/// Integral value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Composite rule over `[breaks[0], breaks[last]]`; each segment between
/// consecutive breakpoints is cut into panels no wider than `width`.
pub fn composite(
    rule: &GaussLegendre,
    breaks: &[f64],
    width: f64,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * step;
            total += rule.integrate(lo, lo + step, &mut f);
        }
    }
    total
}

/// Halves the panel width until successive composite values agree to `rel_tol`.
pub fn adaptive(
    breaks: &[f64],
    width0: f64,
    rel_tol: f64,
    max_level: u32,
    mut f: impl FnMut(f64) -> f64,
) -> Quad {
    let rule = gl16();
    let mut prev = composite(rule, breaks, width0, &mut f);
    let mut width = width0;
    for _ in 0..max_level {
        width *= 0.5;
        let cur = composite(rule, breaks, width, &mut f);
        let err = (cur - prev).abs();
        if err <= rel_tol * cur.abs() || err < 1e-300 {
            return Quad { value: cur, error: err, converged: true };
        }
        prev = cur;
    }
    Quad { value: prev, error: f64::INFINITY, converged: false }
}

/// `∫_0^upper g(r) dr` for `g` with an integrable singularity at 0.
///
/// Sums dyadic shells `[upper·2^{-k-1}, upper·2^{-k}]` until the next shell is
/// negligible, then adds `remainder(eps)`, a caller-supplied bound on the
/// mass of `[0, eps]`, to the error.
pub fn dyadic_from_origin(
    upper: f64,
    rel_tol: f64,
    breaks: &[f64],
    mut g: impl FnMut(f64) -> f64,
    remainder: impl Fn(f64) -> f64,
) -> Quad {
    let mut total = 0.0;
    let mut err = 0.0;
    let mut converged = true;
    let mut hi = upper;
    for _ in 0..200 {
        let lo = 0.5 * hi;
        let mut seg = vec![lo];
        seg.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        seg.push(hi);
        let q = adaptive(&seg, hi - lo, rel_tol, 12, &mut g);
        converged &= q.converged;
        total += q.value;
        err += q.error;
        hi = lo;
        let rem = remainder(hi);
        if rem <= rel_tol * total.abs() || rem < 1e-300 {
            err += rem;
            return Quad { value: total, error: err, converged };
        }
    }
    let rem = remainder(hi);
    Quad { value: total, error: err + rem, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let r = GaussLegendre::new(8);
        // Degree 15 is integrated exactly.
        let v = r.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dyadic_handles_sqrt_singularity() {
        // ∫_0^1 r^{-1/2} dr = 2.
        let q = dyadic_from_origin(1.0, 1e-10, &[], |r| r.powf(-0.5), |e| 2.0 * e.sqrt());
        assert!((q.value - 2.0).abs() < 1e-8, "{q:?}");
    }
}
