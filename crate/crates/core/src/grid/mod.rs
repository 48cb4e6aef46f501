//! Lattice discretization of the Dirichlet form.
//!
//! The generator acts on functions on the lattice nodes as
//! `Lf(i) = Σ_j q_ij (f(j) − f(i)) − κ_i f(i)` with symmetric rates `q` and a
//! killing rate `κ` (restricted mode only), so that
//! `−⟨Lf, f⟩·h^d = ½ Σ_{i,j} q_ij (f(j) − f(i))² h^d + Σ_i κ_i f(i)² h^d`.

mod assemble;
mod chain;
mod export;
mod harmonic;
mod heat;
mod inequalities;

pub use assemble::{assemble, assemble_with_kernel, cell_averaged_weight, subcell_moment};
pub use chain::{chain_sample, ChainSampler};
pub use export::{export_operator, write_operator};
pub use harmonic::{solve_harmonic, HarmonicProblem, HarmonicSolver};
pub use heat::heat_row;
pub use inequalities::{nash_ratio, weighted_poincare_ratio, RatioSweep, TestFunction};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, Point};

/// Default node cap.
pub const NODE_CAP: usize = 40_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Torus `[−L, L)^d`; jumps use minimum-image displacements.
    Periodic,
    /// Box `[−L, L]^d`; jumps leaving the box are killed.
    Restricted,
}

fn default_cap() -> usize {
    NODE_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Half-width `L` of the box.
    pub extent: f64,
    pub h: f64,
    pub boundary_mode: BoundaryMode,
    #[serde(default = "default_cap")]
    pub node_cap: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, h: f64, boundary_mode: BoundaryMode) -> Self {
        GridSpec { dim, extent, h, boundary_mode, node_cap: NODE_CAP }
    }

    /// Same box with half the mesh width.
    pub fn refined(&self) -> Self {
        GridSpec { h: 0.5 * self.h, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::InvalidInput(format!("grid dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.h > 0.0 && self.extent > 0.0) {
            return Err(Error::InvalidInput("grid extent and mesh width must be positive".into()));
        }
        let cells = self.extent / self.h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidInput(format!("extent/h = {cells} is not an integer")));
        }
        let nodes = self.n_nodes();
        if nodes > self.node_cap {
            return Err(Error::NodeCap { nodes, cap: self.node_cap });
        }
        Ok(())
    }

    /// Nodes per axis.
    pub fn n_side(&self) -> usize {
        let cells = (2.0 * self.extent / self.h).round() as usize;
        match self.boundary_mode {
            BoundaryMode::Periodic => cells,
            BoundaryMode::Restricted => cells + 1,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_side().pow(self.dim as u32)
    }

    /// Lattice index along each axis.
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i, 0]
        } else {
            let n = self.n_side();
            [i / n, i % n]
        }
    }

    pub fn flat_index(&self, m: [usize; 2]) -> usize {
        if self.dim == 1 {
            m[0]
        } else {
            m[0] * self.n_side() + m[1]
        }
    }

    pub fn coord(&self, i: usize) -> Point {
        let m = self.multi_index(i);
        let mut p = Point::ORIGIN;
        for k in 0..self.dim {
            p.0[k] = -self.extent + m[k] as f64 * self.h;
        }
        p
    }

    /// Node closest to `p` (wrapping in periodic mode), if `p` lies in the box.
    pub fn nearest_node(&self, p: &Point) -> Option<usize> {
        let n = self.n_side() as i64;
        let mut m = [0usize; 2];
        for k in 0..self.dim {
            let mut v = ((p.0[k] + self.extent) / self.h).round() as i64;
            match self.boundary_mode {
                BoundaryMode::Periodic => v = v.rem_euclid(n),
                BoundaryMode::Restricted if !(0..n).contains(&v) => return None,
                BoundaryMode::Restricted => {}
            }
            m[k] = v as usize;
        }
        Some(self.flat_index(m))
    }

    /// Displacement from `a` to `b`, minimum image in periodic mode.
    pub fn displacement(&self, a: &Point, b: &Point) -> Point {
        let mut d = *b - *a;
        if self.boundary_mode == BoundaryMode::Periodic {
            let p = 2.0 * self.extent;
            for k in 0..self.dim {
                d.0[k] -= p * (d.0[k] / p).round();
            }
        }
        d
    }

    /// Node volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
}

/// Local (diffusion) edge with rate `q = a_e/(2h²)`; `subcell` is the part
/// of the rate that comes from jumps shorter than half a cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalEdge {
    pub i: u32,
    pub j: u32,
    pub rate: f64,
    pub subcell: f64,
}

/// Assembled generator in compressed-row form.
#[derive(Debug)]
pub struct DiscreteGenerator {
    pub grid: GridSpec,
    pub nodes: Vec<Point>,
    /// Nearest-neighbour diffusion edges, each listed once.
    pub local_edges: Vec<LocalEdge>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<u32>,
    /// Jump rates `W_ij = J·h^d` (cell-averaged on the first shell).
    pub(crate) jump: Vec<f64>,
    /// Total off-diagonal rates (local + jump), aligned with `cols`.
    pub(crate) rates: Vec<f64>,
    pub killing: Vec<f64>,
    /// Largest per-node jump mass beyond the assembly cutoff, not represented.
    pub tail_mass: f64,
    pub(crate) eigen: OnceLock<heat::Spectral>,
}

impl DiscreteGenerator {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Off-diagonal entries `(j, q_ij)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.rates[r]).map(|(&j, &q)| (j as usize, q))
    }

    /// Jump weight `W_ij` (zero when not assembled).
    pub fn jump_weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.jump[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// Total exit rate `−L_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.rates[r].iter().sum::<f64>() + self.killing[i]
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.apply_into(f, &mut out);
        out
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = -self.killing[i] * f[i];
            let fi = f[i];
            for (j, q) in self.row(i) {
                s += q * (f[j] - fi);
            }
            *o = s;
        }
    }

    /// `⟨f, g⟩` with node weights `h^d`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.grid.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Discrete form split into (diffusion, jump, killing) parts, summed edge
    /// by edge rather than through the generator.
    pub fn energy_parts(&self, f: &[f64]) -> (f64, f64, f64) {
        let v = self.grid.cell_volume();
        let mut local = 0.0;
        let mut sub = 0.0;
        for e in &self.local_edges {
            let d = f[e.j as usize] - f[e.i as usize];
            local += (e.rate - e.subcell) * d * d;
            sub += e.subcell * d * d;
        }
        let mut jump = 0.0;
        for i in 0..self.n() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&j, &w) in self.cols[r.clone()].iter().zip(&self.jump[r]) {
                if (j as usize) > i {
                    let d = f[j as usize] - f[i];
                    jump += w * d * d;
                }
            }
        }
        let kill: f64 = self.killing.iter().zip(f).map(|(k, x)| k * x * x).sum();
        (local * v, (jump + sub) * v, kill * v)
    }

    /// `ℰ_h(f, f)`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let (a, b, c) = self.energy_parts(f);
        a + b + c
    }

    /// Generator without its jump part (same grid and diffusion).
    pub fn local_only_energy(&self, f: &[f64]) -> f64 {
        self.energy_parts(f).0
    }

    /// Nodes inside an open ball, using lattice distances.
    pub fn nodes_in_ball(&self, ball: &Ball) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.grid.displacement(&ball.center, &self.nodes[i]).norm() < ball.radius).collect()
    }
}
