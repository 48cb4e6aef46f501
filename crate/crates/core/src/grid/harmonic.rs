//! Harmonic functions with nonlocal boundary data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{BoundaryMode, DiscreteGenerator};
use crate::error::{Error, Result};
use crate::geometry::Ball;

/// Domain size up to which the interior system is factorized densely.
pub const DENSE_SOLVE_LIMIT: usize = 3000;
/// Required relative residual of harmonic solves.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Conjugate gradients for a symmetric positive definite operator.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|a| a * a).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if rr.sqrt() <= rel_tol * bn {
            return Ok((x, it, rr.sqrt() / bn));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, c)| a * c).sum();
        if !(pap > 0.0) {
            return Err(Error::Singular("operator is not positive definite".into()));
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|a| a * a).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    let res = rr.sqrt() / bn;
    if res <= rel_tol {
        Ok((x, max_iter, res))
    } else {
        Err(Error::SolveStalled { residual: res, iterations: max_iter })
    }
}

enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Iterative,
}

/// Interior system `A u_D = B g` on a domain mask, factorized once.
pub struct HarmonicSolver<'a> {
    gen: &'a DiscreteGenerator,
    /// Domain nodes in ascending order.
    pub domain: Vec<usize>,
    /// Position of each node in `domain`, or `usize::MAX` outside.
    local: Vec<usize>,
    factor: Factor,
}

impl<'a> HarmonicSolver<'a> {
    pub fn new(gen: &'a DiscreteGenerator, mask: &[bool]) -> Result<Self> {
        if mask.len() != gen.n() {
            return Err(Error::InvalidInput("domain mask length differs from node count".into()));
        }
        let domain: Vec<usize> = (0..gen.n()).filter(|&i| mask[i]).collect();
        if domain.is_empty() {
            return Err(Error::InvalidInput("empty harmonic domain".into()));
        }
        let mut local = vec![usize::MAX; gen.n()];
        for (k, &i) in domain.iter().enumerate() {
            local[i] = k;
        }
        let leak: f64 = domain
            .iter()
            .map(|&i| gen.killing[i] + gen.row(i).filter(|&(j, _)| !mask[j]).map(|(_, q)| q).sum::<f64>())
            .sum();
        if !(leak > 0.0) {
            return Err(Error::Singular("domain is not coupled to its complement".into()));
        }
        let factor = if domain.len() <= DENSE_SOLVE_LIMIT {
            let m = domain.len();
            let mut a = DMatrix::zeros(m, m);
            for (k, &i) in domain.iter().enumerate() {
                a[(k, k)] = gen.exit_rate(i);
                for (j, q) in gen.row(i) {
                    if local[j] != usize::MAX {
                        a[(k, local[j])] -= q;
                    }
                }
            }
            Factor::Dense(Cholesky::new(a).ok_or_else(|| Error::Singular("interior matrix is not positive definite".into()))?)
        } else {
            Factor::Iterative
        };
        Ok(HarmonicSolver { gen, domain, local, factor })
    }

    fn apply_interior(&self, x: &[f64], out: &mut [f64]) {
        for (k, &i) in self.domain.iter().enumerate() {
            let mut s = self.gen.exit_rate(i) * x[k];
            for (j, q) in self.gen.row(i) {
                let l = self.local[j];
                if l != usize::MAX {
                    s -= q * x[l];
                }
            }
            out[k] = s;
        }
    }

    /// Right-hand side `Σ_{j ∉ D} q_ij g_j` for data on all nodes.
    pub fn coupling(&self, g: &[f64]) -> Vec<f64> {
        self.domain
            .iter()
            .map(|&i| self.gen.row(i).filter(|&(j, _)| self.local[j] == usize::MAX).map(|(j, q)| q * g[j]).sum())
            .collect()
    }

    /// Solves `A u = b` on the domain; returns `u` and the relative residual.
    pub fn solve_interior(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut u = match &self.factor {
            Factor::Dense(ch) => ch.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
            Factor::Iterative => {
                conjugate_gradient(|x, o| self.apply_interior(x, o), b, &vec![0.0; b.len()], 1e-12, 50_000)?.0
            }
        };
        let mut r = vec![0.0; b.len()];
        let residual = |u: &[f64], r: &mut Vec<f64>| {
            self.apply_interior(u, r);
            let rn = r.iter().zip(b).map(|(a, c)| (c - a) * (c - a)).sum::<f64>().sqrt();
            if bn > 0.0 { rn / bn } else { rn }
        };
        let mut res = residual(&u, &mut r);
        if res > RESIDUAL_TOL {
            // One step of iterative refinement.
            let corr: Vec<f64> = r.iter().zip(b).map(|(a, c)| c - a).collect();
            let (du, _) = match &self.factor {
                Factor::Dense(ch) => (ch.solve(&DVector::from_column_slice(&corr)).as_slice().to_vec(), 0),
                Factor::Iterative => (conjugate_gradient(|x, o| self.apply_interior(x, o), &corr, &vec![0.0; b.len()], 1e-12, 50_000)?.0, 0),
            };
            for (a, d) in u.iter_mut().zip(du) {
                *a += d;
            }
            res = residual(&u, &mut r);
        }
        if res > RESIDUAL_TOL {
            return Err(Error::SolveStalled { residual: res, iterations: 1 });
        }
        Ok((u, res))
    }

    /// Harmonic extension of `g`: equals `g` off the domain.
    pub fn solve(&self, g: &[f64]) -> Result<(Vec<f64>, f64)> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("boundary data must be finite".into()));
        }
        let (u, res) = self.solve_interior(&self.coupling(g))?;
        let mut full = g.to_vec();
        for (k, &i) in self.domain.iter().enumerate() {
            full[i] = u[k];
        }
        Ok((full, res))
    }

    /// Harmonic measure of a single exterior node `j`: `u = A⁻¹ Q_{D,j}` on the domain.
    pub fn point_mass_response(&self, j: usize) -> Result<Vec<f64>> {
        let b: Vec<f64> = self
            .domain
            .iter()
            .map(|&i| self.gen.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, q)| q))
            .collect();
        Ok(self.solve_interior(&b)?.0)
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.local[i] != usize::MAX
    }

    /// Position of node `i` in the domain ordering.
    pub fn local_index(&self, i: usize) -> Option<usize> {
        (self.local[i] != usize::MAX).then_some(self.local[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicProblem {
    pub domain_nodes: Vec<usize>,
    pub boundary_data: Vec<f64>,
    /// Values on `domain_nodes`.
    pub solution: Vec<f64>,
    pub residual: f64,
}

impl HarmonicProblem {
    /// Solution extended by the boundary data to all nodes.
    pub fn full(&self) -> Vec<f64> {
        let mut f = self.boundary_data.clone();
        for (k, &i) in self.domain_nodes.iter().enumerate() {
            f[i] = self.solution[k];
        }
        f
    }
}

/// Solves `Lu = 0` in the lattice ball with data on every other node.
pub fn solve_harmonic(gen: &DiscreteGenerator, ball: &Ball, boundary_data: &[f64]) -> Result<HarmonicProblem> {
    if boundary_data.len() != gen.n() {
        return Err(Error::InvalidInput("boundary data must cover every node".into()));
    }
    if gen.grid.boundary_mode == BoundaryMode::Restricted {
        let l = gen.grid.extent;
        if (0..gen.dim()).any(|k| ball.center.0[k].abs() + ball.radius >= l) {
            return Err(Error::InvalidInput("ball must lie strictly inside the grid box".into()));
        }
    }
    let nodes = gen.nodes_in_ball(ball);
    let mut mask = vec![false; gen.n()];
    for &i in &nodes {
        mask[i] = true;
    }
    let solver = HarmonicSolver::new(gen, &mask)?;
    let (full, residual) = solver.solve(boundary_data)?;
    Ok(HarmonicProblem {
        solution: solver.domain.iter().map(|&i| full[i]).collect(),
        domain_nodes: solver.domain,
        boundary_data: boundary_data.to_vec(),
        residual,
    })
}
