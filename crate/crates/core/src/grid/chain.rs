//! Exact simulation of the lattice Markov chain.

use rand::Rng;
use rand_distr::Exp1;

use super::DiscreteGenerator;
use crate::error::{Error, Result};
use crate::pathsim::{JumpEvent, JumpMark, PathSkeleton, Termination};

/// Gillespie sampler with per-row cumulative rates.
pub struct ChainSampler<'a> {
    gen: &'a DiscreteGenerator,
    cum: Vec<f64>,
    total: Vec<f64>,
}

impl<'a> ChainSampler<'a> {
    pub fn new(gen: &'a DiscreteGenerator) -> Result<Self> {
        let mut cum = Vec::with_capacity(gen.rates.len());
        let mut total = Vec::with_capacity(gen.n());
        for i in 0..gen.n() {
            let mut s = gen.killing[i];
            for k in gen.row_ptr[i]..gen.row_ptr[i + 1] {
                s += gen.rates[k];
                cum.push(s);
            }
            if !s.is_finite() {
                return Err(Error::NonFinite { what: "exit rate", point: gen.nodes[i] });
            }
            total.push(s);
        }
        Ok(ChainSampler { gen, cum, total })
    }

    /// Next node after leaving `i`, or `None` when killed.
    fn next<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Option<usize> {
        let u = rng.random::<f64>() * self.total[i];
        if u < self.gen.killing[i] {
            return None;
        }
        let r = self.gen.row_ptr[i]..self.gen.row_ptr[i + 1];
        let row = &self.cum[r.clone()];
        let k = row.partition_point(|&c| c <= u).min(row.len() - 1);
        Some(self.gen.cols[r.start + k] as usize)
    }

    /// State at each of the increasing `times` (`None` once killed).
    pub fn states_at<R: Rng + ?Sized>(&self, source: usize, times: &[f64], rng: &mut R) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(times.len());
        let mut state = Some(source);
        let mut t = 0.0;
        let mut k = 0;
        while k < times.len() {
            let Some(i) = state else {
                out.push(None);
                k += 1;
                continue;
            };
            let rate = self.total[i];
            let hold = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
            while k < times.len() && times[k] < t + hold {
                out.push(Some(i));
                k += 1;
            }
            if k == times.len() {
                break;
            }
            t += hold;
            state = self.next(i, rng);
        }
        out
    }

    /// Full path up to `horizon`.
    pub fn path<R: Rng + ?Sized>(&self, source: usize, horizon: f64, rng: &mut R) -> PathSkeleton {
        let nodes = &self.gen.nodes;
        let mut times = vec![0.0];
        let mut states = vec![nodes[source]];
        let mut jump_marks = vec![JumpMark::Diffusive];
        let mut jumps = Vec::new();
        let mut i = source;
        let mut t = 0.0;
        loop {
            let rate = self.total[i];
            if rate == 0.0 {
                break;
            }
            t += rng.sample::<f64, _>(Exp1) / rate;
            if t >= horizon {
                break;
            }
            match self.next(i, rng) {
                None => {
                    times.push(t);
                    states.push(nodes[i]);
                    jump_marks.push(JumpMark::Diffusive);
                    return PathSkeleton { times, states, jump_marks, jumps, terminated_by: Termination::Absorbed };
                }
                Some(j) => {
                    let is_edge = self.gen.jump_weight(i, j) == 0.0
                        || self.gen.grid.displacement(&nodes[i], &nodes[j]).norm() <= self.gen.grid.h * (1.0 + 1e-9);
                    let kind = if is_edge { JumpMark::Diffusive } else { JumpMark::SmallJump };
                    if kind != JumpMark::Diffusive {
                        jumps.push(JumpEvent { t, from: nodes[i], to: nodes[j], kind });
                    }
                    times.push(t);
                    states.push(nodes[j]);
                    jump_marks.push(kind);
                    i = j;
                }
            }
        }
        if *times.last().unwrap() < horizon {
            times.push(horizon);
            states.push(nodes[i]);
            jump_marks.push(JumpMark::Diffusive);
        }
        PathSkeleton { times, states, jump_marks, jumps, terminated_by: Termination::Horizon }
    }
}

/// Lattice path from node `source` up to `horizon`.
pub fn chain_sample<R: Rng + ?Sized>(gen: &DiscreteGenerator, source: usize, horizon: f64, rng: &mut R) -> Result<PathSkeleton> {
    if source >= gen.n() {
        return Err(Error::InvalidInput(format!("source node {source} out of range")));
    }
    Ok(ChainSampler::new(gen)?.path(source, horizon, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble, BoundaryMode, GridSpec};
    use crate::model::ModelSpec;
    use crate::rng::RngPlan;
    use crate::stats::{ks_critical, ks_statistic};

    #[test]
    fn holding_time_is_exponential() {
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 1.0, 0.125, BoundaryMode::Periodic)).unwrap();
        let s = ChainSampler::new(&g).unwrap();
        let rate = g.exit_rate(4);
        let plan = RngPlan::new(8);
        let mut holds: Vec<f64> = (0..2000).map(|k| s.path(4, 10.0, &mut plan.stream(k)).times[1]).collect();
        let d = ks_statistic(&mut holds, |x| 1.0 - (-rate * x).exp());
        assert!(d < ks_critical(0.01, holds.len()), "{d}");
    }

    #[test]
    fn zero_rate_chain_never_moves() {
        let grid = GridSpec::new(1, 1.0, 1.0, BoundaryMode::Periodic);
        let g = DiscreteGenerator {
            nodes: vec![grid.coord(0)],
            grid,
            local_edges: vec![],
            row_ptr: vec![0, 0],
            cols: vec![],
            jump: vec![],
            rates: vec![],
            killing: vec![0.0],
            tail_mass: 0.0,
            eigen: Default::default(),
        };
        let p = chain_sample(&g, 0, 5.0, &mut RngPlan::new(0).stream(0)).unwrap();
        assert!(p.states.iter().all(|x| *x == g.nodes[0]));
        assert_eq!(p.terminated_by, Termination::Horizon);
    }
}
