//! Rows of the semigroup `e^{tL}`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::harmonic::conjugate_gradient;
use super::DiscreteGenerator;
use crate::error::{Error, Result};

/// Node count up to which rows come from a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 2000;
/// Entries in `[−NEG_TOL, 0)` are rounding noise and clamped to zero.
pub const NEG_TOL: f64 = 1e-12;

#[derive(Debug)]
pub(crate) struct Spectral {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DiscreteGenerator {
    pub(crate) fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, q) in self.row(i) {
                m[(i, j)] = q;
            }
            m[(i, i)] = -self.exit_rate(i);
        }
        m
    }

    fn spectral(&self) -> &Spectral {
        self.eigen.get_or_init(|| {
            let e = SymmetricEigen::new(self.dense());
            Spectral { values: e.eigenvalues.iter().copied().collect(), vectors: e.eigenvectors }
        })
    }

    /// Eigenvalues of `L`, ascending (dense path only).
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        if self.n() > DENSE_LIMIT {
            return Err(Error::InvalidInput(format!("spectrum needs at most {DENSE_LIMIT} nodes")));
        }
        let mut v = self.spectral().values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        Ok(v)
    }

    /// `e^{tL} f` for an arbitrary vector.
    pub fn propagate(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("time must be finite and nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        if self.n() <= DENSE_LIMIT {
            let s = self.spectral();
            let n = self.n();
            let mut coef = vec![0.0; n];
            for (k, c) in coef.iter_mut().enumerate() {
                let col = s.vectors.column(k);
                *c = (t * s.values[k]).exp() * col.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
            }
            let mut out = vec![0.0; n];
            for (k, c) in coef.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                for (o, v) in out.iter_mut().zip(s.vectors.column(k).iter()) {
                    *o += c * v;
                }
            }
            Ok(out)
        } else {
            self.crank_nicolson(f, t)
        }
    }

    /// Crank–Nicolson with `dt ≤ h²/4`, each implicit step solved by CG.
    fn crank_nicolson(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        let h = self.grid.h;
        let steps = (t / (0.25 * h * h)).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let mut u = f.to_vec();
        let mut lu = vec![0.0; self.n()];
        for _ in 0..steps {
            self.apply_into(&u, &mut lu);
            let rhs: Vec<f64> = u.iter().zip(&lu).map(|(a, b)| a + 0.5 * dt * b).collect();
            let op = |x: &[f64], out: &mut [f64]| {
                self.apply_into(x, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - 0.5 * dt * *o;
                }
            };
            u = conjugate_gradient(op, &rhs, &u, 1e-13, 10_000)?.0;
        }
        Ok(u)
    }
}

/// Row `source` of `e^{tL}`: the law of the lattice chain at time `t`
/// (sub-probability in restricted mode). Divide by `h^d` for a density.
pub fn heat_row(gen: &DiscreteGenerator, t: f64, source: usize) -> Result<Vec<f64>> {
    if source >= gen.n() {
        return Err(Error::InvalidInput(format!("source node {source} out of range")));
    }
    let mut e = vec![0.0; gen.n()];
    e[source] = 1.0;
    // L is symmetric, so the row equals the column e^{tL} e_source.
    let mut row = gen.propagate(&e, t)?;
    for (node, v) in row.iter_mut().enumerate() {
        if *v < -NEG_TOL {
            return Err(Error::Instability { node, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble, BoundaryMode, GridSpec};
    use crate::model::kernel::JumpKernelSpec;
    use crate::model::ModelSpec;

    #[test]
    fn identity_at_time_zero() {
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 1.0, 0.125, BoundaryMode::Periodic)).unwrap();
        let r = heat_row(&g, 0.0, 3).unwrap();
        assert_eq!(r[3], 1.0);
        assert_eq!(r.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn laplacian_spectrum() {
        // Eigenvalues −(1 − cos(2πk/n))/h² of the periodic second difference over 2h².
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 1.0, 0.125, BoundaryMode::Periodic)).unwrap();
        let n = g.n();
        let mut want: Vec<f64> = (0..n)
            .map(|k| -(1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / (0.125f64 * 0.125))
            .collect();
        want.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in g.spectrum().unwrap().iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn gaussian_density_for_brownian_grid() {
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 8.0, 1.0 / 32.0, BoundaryMode::Periodic)).unwrap();
        let s = g.grid.nearest_node(&crate::geometry::Point::ORIGIN).unwrap();
        let row = heat_row(&g, 1.0, s).unwrap();
        let mut worst: f64 = 0.0;
        for (i, p) in row.iter().enumerate() {
            let x = g.nodes[i].0[0];
            let exact = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            worst = worst.max((p / g.grid.h - exact).abs());
        }
        assert!(worst < 1e-3, "{worst}");
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn symmetry_and_semigroup() {
        let m = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(0.5).with_modulation(0.5, 1.5)).unwrap();
        let g = assemble(&m, &GridSpec::new(1, 2.0, 0.125, BoundaryMode::Restricted)).unwrap();
        let (a, b) = (5, 20);
        let ra = heat_row(&g, 0.3, a).unwrap();
        let rb = heat_row(&g, 0.3, b).unwrap();
        assert!((ra[b] - rb[a]).abs() < 1e-13);
        let two = heat_row(&g, 0.5, a).unwrap();
        let composed = g.propagate(&heat_row(&g, 0.2, a).unwrap(), 0.3).unwrap();
        for (x, y) in two.iter().zip(&composed) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
