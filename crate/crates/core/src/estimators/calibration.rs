//! Cross-checks of the samplers against exact answers: the lattice chain
//! against its own semigroup, and Brownian paths against the Gaussian law.

use serde::{Deserialize, Serialize};

use super::density::{sample_marginals, Binning, DensityEstimate};
use crate::error::{Error, Result};
use crate::exec::{Executor, Merge};
use crate::geometry::Point;
use crate::grid::{heat_row, ChainSampler, DiscreteGenerator};
use crate::model::ModelSpec;
use crate::pathsim::{SimParams, Simulator};
use crate::rng::RngPlan;
use crate::stats::{fit_line, normal_cdf, LineFit};

/// Binned chain marginals against `heat_row`, with standard errors computed
/// from the oracle bin probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub times: Vec<f64>,
    pub n_chains: usize,
    pub n_groups: usize,
    /// Rows `(t, group, empirical, oracle, z)`.
    pub rows: Vec<[f64; 5]>,
    pub max_abs_z: f64,
}

impl OracleComparison {
    pub fn within(&self, se_margin: f64) -> bool {
        self.max_abs_z <= se_margin
    }
}

struct Counts(Vec<Vec<u64>>);

impl Merge for Counts {
    fn merge(&mut self, o: Self) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

fn z_score(emp: f64, p: f64, n: usize) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se > 0.0 {
        (emp - p) / se
    } else if emp == p {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Runs `n_chains` exact lattice chains from `source` and compares the law at
/// each time with the semigroup row, on blocks of `group` nodes per axis.
pub fn chain_vs_oracle(
    gen: &DiscreteGenerator,
    source: usize,
    times: &[f64],
    n_chains: usize,
    group: usize,
    plan: &RngPlan,
    exec: &Executor,
) -> Result<OracleComparison> {
    if group == 0 || n_chains == 0 {
        return Err(Error::InvalidInput("need a positive group size and chain count".into()));
    }
    let side = gen.grid.n_side();
    let per_axis = side.div_ceil(group);
    let n_groups = per_axis.pow(gen.dim() as u32);
    let group_of = |i: usize| -> usize {
        let m = gen.grid.multi_index(i);
        (0..gen.dim()).rev().fold(0, |acc, k| acc * per_axis + m[k] / group)
    };
    let sampler = ChainSampler::new(gen)?;
    let counts = exec.fold(
        n_chains,
        || Counts(vec![vec![0; n_groups]; times.len()]),
        |i, acc| {
            let states = sampler.states_at(source, times, &mut plan.stream(i as u64));
            for (k, s) in states.iter().enumerate() {
                if let Some(node) = s {
                    acc.0[k][group_of(*node)] += 1;
                }
            }
            Ok(())
        },
    )?;
    let mut rows = vec![];
    let mut max_abs_z: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let row = heat_row(gen, t, source)?;
        let mut oracle = vec![0.0; n_groups];
        for (i, p) in row.iter().enumerate() {
            oracle[group_of(i)] += p;
        }
        for g in 0..n_groups {
            let emp = counts.0[k][g] as f64 / n_chains as f64;
            let z = z_score(emp, oracle[g], n_chains);
            max_abs_z = max_abs_z.max(z.abs());
            rows.push([t, g as f64, emp, oracle[g], z]);
        }
    }
    Ok(OracleComparison { times: times.to_vec(), n_chains, n_groups, rows, max_abs_z })
}

/// Brownian calibration: the binned density at `t = 1` against the exact
/// Gaussian bin probabilities, and the on-diagonal decay exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCalibration {
    pub dim: usize,
    pub bin_width: f64,
    pub n_bins: usize,
    /// Largest `|p̂ − p|/SE` over bins at `t = 1`, SE under the exact law.
    pub density_max_z: f64,
    pub slope: LineFit,
    /// Rows `(t, on-diagonal estimate, se)`.
    pub on_diagonal: Vec<[f64; 3]>,
}

/// Standard Brownian motion in dimension `dim`, sampled at `t_grid` (which
/// must end at `1`), binned on `[−window, window]^d`.
pub fn gaussian_calibration(
    dim: usize,
    n_paths: usize,
    dt: f64,
    t_grid: &[f64],
    window: f64,
    plan: &RngPlan,
    exec: &Executor,
) -> Result<GaussianCalibration> {
    if t_grid.last().copied() != Some(1.0) {
        return Err(Error::InvalidInput("calibration times must end at t = 1".into()));
    }
    let model = ModelSpec::brownian(dim);
    let sim = Simulator::small_jump(&model, SimParams::new(dt, 1.0))?;
    let x0 = Point::ORIGIN;
    let s = sample_marginals(&sim, &x0, t_grid, n_paths, plan, exec)?;
    let mut on_diagonal = vec![];
    let (mut lx, mut ly) = (vec![], vec![]);
    let mut last = None;
    for (k, &t) in t_grid.iter().enumerate() {
        let w = Binning::rule_width(dim, dt, &s.states[k]);
        let est = DensityEstimate::from_samples(t, &x0, &s.states[k], Binning::centered(dim, &x0, w, window))?;
        let b = est.source_bin();
        on_diagonal.push([t, est.density[b], est.se[b]]);
        lx.push(t.ln());
        ly.push(est.density[b].ln());
        last = Some(est);
    }
    let est = last.expect("nonempty grid");
    let mut density_max_z: f64 = 0.0;
    for b in 0..est.binning.n_bins() {
        let (lo, hi) = est.binning.bounds(b);
        let prob: f64 = (0..dim).map(|k| normal_cdf(hi.0[k]) - normal_cdf(lo.0[k])).product();
        let emp = est.counts[b] as f64 / est.n_paths as f64;
        density_max_z = density_max_z.max(z_score(emp, prob, est.n_paths).abs());
    }
    Ok(GaussianCalibration {
        dim,
        bin_width: est.binning.width,
        n_bins: est.binning.n_bins(),
        density_max_z,
        slope: fit_line(&lx, &ly),
        on_diagonal,
    })
}
