//! Histogram estimates of the transition density from Monte Carlo paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Point;
use crate::model::ModelSpec;
use crate::pathsim::{JumpMark, PathObserver, SimParams, Simulator};
use crate::rng::RngPlan;

/// States of `n_paths` independent paths at each of `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSamples {
    pub times: Vec<f64>,
    /// `states[k][i]`: path `i` at `times[k]`.
    pub states: Vec<Vec<Point>>,
}

struct Checkpoints<'a> {
    times: &'a [f64],
    eps: f64,
    next: usize,
    out: Vec<Point>,
    last: Point,
}

impl PathObserver for Checkpoints<'_> {
    fn diffuse(&mut self, t0: f64, from: &Point, _t1: f64, to: &Point) -> bool {
        while self.next < self.times.len() && t0 >= self.times[self.next] - self.eps {
            self.out.push(*from);
            self.next += 1;
        }
        self.last = *to;
        false
    }

    fn jump(&mut self, _t: f64, _from: &Point, to: &Point, _kind: JumpMark) -> bool {
        self.last = *to;
        false
    }
}

/// Runs `n_paths` paths to `max(times)` and records the càdlàg state at each
/// time. Times should sit on the `dt` lattice; path `i` uses stream `i`.
pub fn sample_marginals(
    sim: &Simulator,
    x0: &Point,
    times: &[f64],
    n_paths: usize,
    plan: &RngPlan,
    exec: &Executor,
) -> Result<MarginalSamples> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::InvalidInput("checkpoint times must be nonnegative and increasing".into()));
    }
    let horizon = *times.last().expect("nonempty");
    let per_path = exec.map(n_paths, |i| {
        let mut obs = Checkpoints { times, eps: 1e-9 * sim.dt(), next: 0, out: Vec::with_capacity(times.len()), last: *x0 };
        sim.run(x0, horizon, &mut plan.stream(i as u64), &mut obs)?;
        while obs.out.len() < times.len() {
            obs.out.push(obs.last);
        }
        Ok(obs.out)
    })?;
    let mut states = vec![Vec::with_capacity(n_paths); times.len()];
    for path in per_path {
        for (k, p) in path.into_iter().enumerate() {
            states[k].push(p);
        }
    }
    Ok(MarginalSamples { times: times.to_vec(), states })
}

/// Square bins of common width; bin 0 starts at `origin` and the centre bin
/// is centred at the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub dim: usize,
    pub origin: Point,
    pub width: f64,
    pub per_axis: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Binning {
    /// Bins of `width` covering `center ± half_window` on each axis.
    pub fn centered(dim: usize, center: &Point, width: f64, half_window: f64) -> Self {
        let n_half = (half_window / width - 0.5).ceil().max(0.0) as usize;
        let mut origin = *center;
        for k in 0..dim {
            origin.0[k] -= (n_half as f64 + 0.5) * width;
        }
        Binning { dim, origin, width, per_axis: 2 * n_half + 1 }
    }

    /// Width `max(2√dt/5, 2·IQR·n^{−1/3})`, the larger of the diffusive step
    /// scale and the Freedman–Diaconis width of the sample.
    pub fn rule_width(dim: usize, dt: f64, samples: &[Point]) -> f64 {
        let diffusive = 2.0 * dt.sqrt() / 5.0;
        if samples.len() < 4 {
            return diffusive;
        }
        let mut iqr = 0.0;
        for k in 0..dim {
            let mut c: Vec<f64> = samples.iter().map(|p| p.0[k]).collect();
            c.sort_by(|a, b| a.total_cmp(b));
            iqr += quantile(&c, 0.75) - quantile(&c, 0.25);
        }
        iqr /= dim as f64;
        let fd = 2.0 * iqr * (samples.len() as f64).powf(-1.0 / 3.0);
        diffusive.max(fd)
    }

    pub fn n_bins(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn volume(&self) -> f64 {
        self.width.powi(self.dim as i32)
    }

    pub fn bin_of(&self, p: &Point) -> Option<usize> {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            let c = ((p.0[k] - self.origin.0[k]) / self.width).floor();
            if !(c >= 0.0 && c < self.per_axis as f64) {
                return None;
            }
            idx = idx * self.per_axis + c as usize;
        }
        Some(idx)
    }

    pub fn center(&self, bin: usize) -> Point {
        let mut p = self.origin;
        let mut b = bin;
        for k in 0..self.dim {
            p.0[k] += ((b % self.per_axis) as f64 + 0.5) * self.width;
            b /= self.per_axis;
        }
        p
    }

    /// Lower and upper corners of a bin.
    pub fn bounds(&self, bin: usize) -> (Point, Point) {
        let c = self.center(bin);
        let mut lo = c;
        let mut hi = c;
        for k in 0..self.dim {
            lo.0[k] -= 0.5 * self.width;
            hi.0[k] += 0.5 * self.width;
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub t: f64,
    pub x0: Point,
    pub binning: Binning,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// `√(p̂(1 − p̂·vol)/n)/vol` per bin.
    pub se: Vec<f64>,
    pub n_paths: usize,
    pub escaped: usize,
}

impl DensityEstimate {
    pub fn from_samples(t: f64, x0: &Point, samples: &[Point], binning: Binning) -> Result<Self> {
        let mut counts = vec![0u64; binning.n_bins()];
        let mut escaped = 0;
        for p in samples {
            match binning.bin_of(p) {
                Some(b) => counts[b] += 1,
                None => escaped += 1,
            }
        }
        let n = samples.len();
        if n == 0 || escaped == n {
            return Err(Error::Estimator(format!("all {n} paths escaped the density window")));
        }
        let vol = binning.volume();
        let nf = n as f64;
        let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (nf * vol)).collect();
        let se = density.iter().map(|&p| ((p * (1.0 - p * vol)).max(0.0) / nf).sqrt() / vol).collect();
        Ok(DensityEstimate { t, x0: *x0, binning, counts, density, se, n_paths: n, escaped })
    }

    /// Standard error of a bin density if its true bin probability were `prob`.
    pub fn se_under(&self, prob: f64) -> f64 {
        (prob * (1.0 - prob) / self.n_paths as f64).sqrt() / self.binning.volume()
    }

    /// Bin containing the source point.
    pub fn source_bin(&self) -> usize {
        self.binning.bin_of(&self.x0).expect("source lies in the centre bin")
    }
}

/// Histogram estimate of `p(t, x0, ·)` with the rule width on a window of
/// `half_window` around `x0`.
pub fn estimate_density(
    model: &ModelSpec,
    t: f64,
    x0: &Point,
    n_paths: usize,
    half_window: f64,
    params: SimParams,
    plan: &RngPlan,
    exec: &Executor,
) -> Result<DensityEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("density time must be positive, got {t}")));
    }
    let sim = Simulator::full(model, params)?;
    let s = sample_marginals(&sim, x0, &[t], n_paths, plan, exec)?;
    let w = Binning::rule_width(model.dim, params.dt, &s.states[0]);
    DensityEstimate::from_samples(t, x0, &s.states[0], Binning::centered(model.dim, x0, w, half_window))
}
