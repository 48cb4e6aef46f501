//! Continuous-space path sampler.
//!
//! A path is an Euler–Maruyama diffusion with small jumps on `[δ, λ]` drawn by
//! thinning an envelope Poisson clock, jumps below `δ` folded into the
//! Gaussian increment, and (optionally) big jumps beyond `λ` inserted by
//! Meyer's alarm-clock construction. Paths are streamed to a
//! [`PathObserver`], so functionals never need the full skeleton.

mod functionals;

pub use functionals::{
    exit_time, hitting_before_exit, meyer_augment, simulate_small_jump, sup_displacement, ExitObserver,
    ExitRecord, HitRecord, HittingObserver, SkeletonRecorder, SupObserver,
};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::coeff::{CoeffFamily, Mat2};
use crate::model::moments::{split_kernel, KernelSplit};
use crate::model::{CoefficientField, JumpKernel, ModelSpec};

/// Smallest time step before the sampler gives up.
pub const MIN_DT: f64 = 1e-12;
/// Largest admissible expected number of jump proposals per minimal step.
pub const MAX_RATE_DT: f64 = 0.1;
/// Proposal budget of the big-jump rejection sampler.
pub const MAX_PROPOSALS: usize = 10_000;
/// Default ratio `λ/δ`.
pub const DELTA_FRACTION: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpMark {
    Diffusive,
    SmallJump,
    BigJump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Horizon,
    Exit,
    Absorbed,
}

/// One jump with its exact pre- and post-jump states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub from: Point,
    pub to: Point,
    pub kind: JumpMark,
}

/// Sampled trajectory. `jump_marks[k]` describes the move into `states[k]`
/// (`jump_marks[0]` is `Diffusive` by convention). A jump entry also
/// contains the diffusive increment of the step that ended at the jump; the
/// exact jump endpoints are kept in `jumps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub jump_marks: Vec<JumpMark>,
    pub jumps: Vec<JumpEvent>,
    pub terminated_by: Termination,
}

impl PathSkeleton {
    pub fn final_state(&self) -> Point {
        *self.states.last().expect("skeleton has a start state")
    }

    pub fn count(&self, kind: JumpMark) -> usize {
        self.jumps.iter().filter(|j| j.kind == kind).count()
    }
}

/// Receives path increments in time order. Returning `true` stops the path.
pub trait PathObserver {
    fn diffuse(&mut self, _t0: f64, _from: &Point, _t1: f64, _to: &Point) -> bool {
        false
    }

    fn jump(&mut self, _t: f64, _from: &Point, _to: &Point, _kind: JumpMark) -> bool {
        false
    }
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn diffuse(&mut self, t0: f64, from: &Point, t1: f64, to: &Point) -> bool {
        let a = self.0.diffuse(t0, from, t1, to);
        let b = self.1.diffuse(t0, from, t1, to);
        a || b
    }

    fn jump(&mut self, t: f64, from: &Point, to: &Point, kind: JumpMark) -> bool {
        let a = self.0.jump(t, from, to, kind);
        let b = self.1.jump(t, from, to, kind);
        a || b
    }
}

/// Discretization parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    /// Truncation level: jumps above it are big jumps.
    pub lambda: f64,
    /// Gaussian folding floor; defaults to `λ/64`.
    pub delta: Option<f64>,
}

impl SimParams {
    pub fn new(dt: f64, lambda: f64) -> Self {
        SimParams { dt, lambda, delta: None }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.lambda / DELTA_FRACTION)
    }
}

/// Immutable sampler for one model; shared read-only across paths.
#[derive(Clone, Debug)]
pub struct Simulator {
    dim: usize,
    coeff: CoefficientField,
    kernel: JumpKernel,
    small: JumpKernel,
    dt: f64,
    delta: f64,
    lambda: f64,
    /// Envelope rate of proposals on `(δ, λ]`.
    small_rate: f64,
    /// Cholesky factor of `a + vI` when it does not depend on the state.
    fixed_sigma: Option<Mat2>,
    split: Option<KernelSplit>,
}

/// Root in `[0, len]` of `n0·s + (n1 − n0)s²/(2·len) = need`.
fn crossing_time(n0: f64, n1: f64, len: f64, need: f64) -> f64 {
    let a = (n1 - n0) / (2.0 * len);
    let disc = (n0 * n0 + 4.0 * a * need).max(0.0);
    let denom = n0 + disc.sqrt();
    if denom <= 0.0 {
        return len;
    }
    (2.0 * need / denom).clamp(0.0, len)
}

fn chol(a: &Mat2, dim: usize) -> Mat2 {
    if dim == 1 {
        return [[a[0][0].max(0.0).sqrt(), 0.0], [0.0, 0.0]];
    }
    let l00 = a[0][0].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { a[1][0] / l00 } else { 0.0 };
    let l11 = (a[1][1] - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}

impl Simulator {
    /// Sampler of the small-jump process `Y^λ` only.
    pub fn small_jump(model: &ModelSpec, params: SimParams) -> Result<Self> {
        Self::build(model, params, None)
    }

    /// Sampler of the full process: `Y^λ` plus Meyer big jumps.
    pub fn full(model: &ModelSpec, params: SimParams) -> Result<Self> {
        let split = split_kernel(&model.jump_kernel(), params.lambda)?;
        Self::build(model, params, Some(split))
    }

    /// Full process with a precomputed split.
    pub fn with_split(model: &ModelSpec, split: KernelSplit, params: SimParams) -> Result<Self> {
        if split.lambda_trunc != params.lambda {
            return Err(Error::InvalidInput("split truncation differs from the sampler's lambda".into()));
        }
        Self::build(model, params, Some(split))
    }

    fn build(model: &ModelSpec, params: SimParams, split: Option<KernelSplit>) -> Result<Self> {
        if !model.coeff.is_smooth() {
            return Err(Error::UnsupportedCoefficients("checkerboard"));
        }
        if !(params.dt > 0.0 && params.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", params.dt)));
        }
        if !(params.lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {}", params.lambda)));
        }
        let delta = params.delta();
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        let kernel = model.jump_kernel();
        if kernel.spec.asym_perturbation != 0.0 {
            return Err(Error::InvalidInput("asymmetric kernels cannot be simulated".into()));
        }
        let small = kernel.with_cut(params.lambda);
        let small_rate = if params.lambda > delta { small.envelope_mass(delta, params.lambda) } else { 0.0 };
        let n_sup = split.as_ref().map_or(0.0, |s| s.n_sup);
        for rate in [small_rate, n_sup] {
            if !rate.is_finite() || rate * MIN_DT > MAX_RATE_DT {
                return Err(Error::StepUnderflow { rate, dt: MIN_DT });
            }
        }
        let constant_coeff = model.coeff.family == CoeffFamily::Constant;
        let fixed_sigma = (constant_coeff && small.is_homogeneous()).then(|| {
            let v = small.small_jump_variance(&Point::ORIGIN, delta);
            let mut a = model.coeff.matrix(&Point::ORIGIN);
            for i in 0..model.dim {
                a[i][i] += v;
            }
            chol(&a, model.dim)
        });
        Ok(Simulator {
            dim: model.dim,
            coeff: model.coeff.clone(),
            kernel,
            small,
            dt: params.dt,
            delta,
            lambda: params.lambda,
            small_rate,
            fixed_sigma,
            split,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Envelope proposal rate of small jumps.
    pub fn small_rate(&self) -> f64 {
        self.small_rate
    }

    pub fn split(&self) -> Option<&KernelSplit> {
        self.split.as_ref()
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    /// Cholesky factor of the effective covariance `a + vI` at `x`.
    fn sigma(&self, x: &Point) -> Mat2 {
        if let Some(s) = self.fixed_sigma {
            return s;
        }
        let v = self.small.small_jump_variance(x, self.delta);
        let mut a = self.coeff.matrix(x);
        for i in 0..self.dim {
            a[i][i] += v;
        }
        chol(&a, self.dim)
    }

    fn gaussian<R: Rng + ?Sized>(&self, sigma: &Mat2, scale: f64, rng: &mut R) -> Point {
        let z0: f64 = rng.sample(StandardNormal);
        if self.dim == 1 {
            return Point([scale * sigma[0][0] * z0, 0.0]);
        }
        let z1: f64 = rng.sample(StandardNormal);
        Point([scale * sigma[0][0] * z0, scale * (sigma[1][0] * z0 + sigma[1][1] * z1)])
    }

    fn diffuse<R: Rng + ?Sized>(&self, x: &Point, sigma: &Mat2, h: f64, rng: &mut R) -> Point {
        let mut y = *x;
        if self.fixed_sigma.is_none() && self.coeff.family == CoeffFamily::SmoothPeriodic {
            y += self.coeff.drift(x) * h;
        }
        y + self.gaussian(sigma, h.sqrt(), rng)
    }

    /// Thinned proposal on `(δ, λ]`: `Some(target)` when accepted.
    fn propose_small<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Option<Point> {
        let h = self.small.sample_envelope(self.delta, self.lambda, rng);
        let r = h.norm();
        let y = *x + h;
        let accept = self.small.eval(x, &y) / self.small.envelope(r);
        (rng.random::<f64>() < accept).then_some(y)
    }

    /// Draws from `(J − J₀)(x, ·)/N(x)` by rejection against the envelope tail.
    fn big_jump<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<Point> {
        for _ in 0..MAX_PROPOSALS {
            let h = self.kernel.sample_envelope(self.lambda, f64::INFINITY, rng);
            let y = *x + h;
            let accept = self.kernel.eval(x, &y) / self.kernel.envelope(h.norm());
            if rng.random::<f64>() < accept {
                return Ok(y);
            }
        }
        Err(Error::RejectionExhausted { state: *x, proposals: MAX_PROPOSALS })
    }

    /// Runs one path from `x0` up to `horizon`, streaming it to `obs`.
    pub fn run<R: Rng + ?Sized, O: PathObserver>(
        &self,
        x0: &Point,
        horizon: f64,
        rng: &mut R,
        obs: &mut O,
    ) -> Result<Termination> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be finite and nonnegative, got {horizon}")));
        }
        if !x0.is_finite() {
            return Err(Error::NonFinite { what: "start state", point: *x0 });
        }
        let exp = |rng: &mut R| -> f64 { rng.sample(Exp1) };
        let mut t = 0.0;
        let mut x = *x0;
        // Step ends are `k·dt`, so checkpoints on the dt lattice are hit exactly.
        let mut step = 0u64;
        let mut next_small = if self.small_rate > 0.0 { exp(rng) / self.small_rate } else { f64::INFINITY };
        let meyer = self.split.as_ref().filter(|s| s.n_sup > 0.0);
        let mut clock = 0.0;
        let mut alarm = exp(rng);
        let mut n_here = meyer.map_or(0.0, |s| s.residual(&x));
        while t < horizon {
            let step_end = ((step + 1) as f64 * self.dt).min(horizon);
            let small_now = next_small <= step_end;
            let t1 = if small_now { next_small } else { step_end };
            let sigma = self.sigma(&x);
            let mut y = self.diffuse(&x, &sigma, t1 - t, rng);
            if let Some(split) = meyer {
                // The clock grows linearly in N along the step; an alarm inside
                // the step is placed at its exact crossing time on a bridge.
                loop {
                    let n_end = split.residual(&y);
                    let len = t1 - t;
                    let inc = 0.5 * (n_here + n_end) * len;
                    if clock + inc < alarm {
                        clock += inc;
                        n_here = n_end;
                        break;
                    }
                    let s = crossing_time(n_here, n_end, len, alarm - clock);
                    let mid = if s < len {
                        let w = s / len;
                        x + (y - x) * w + self.gaussian(&sigma, (s * (len - s) / len).sqrt(), rng)
                    } else {
                        y
                    };
                    if obs.diffuse(t, &x, t + s, &mid) {
                        return Ok(Termination::Exit);
                    }
                    let z = self.big_jump(&mid, rng)?;
                    if obs.jump(t + s, &mid, &z, JumpMark::BigJump) {
                        return Ok(Termination::Exit);
                    }
                    y = z + (y - mid);
                    x = z;
                    t += s;
                    clock = 0.0;
                    alarm = exp(rng);
                    n_here = split.residual(&x);
                }
            }
            if obs.diffuse(t, &x, t1, &y) {
                return Ok(Termination::Exit);
            }
            if small_now {
                if let Some(z) = self.propose_small(&y, rng) {
                    if obs.jump(t1, &y, &z, JumpMark::SmallJump) {
                        return Ok(Termination::Exit);
                    }
                    y = z;
                    if let Some(split) = meyer {
                        n_here = split.residual(&y);
                    }
                }
                next_small = t1 + exp(rng) / self.small_rate;
            } else {
                step += 1;
            }
            x = y;
            t = t1;
        }
        Ok(Termination::Horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::JumpKernelSpec;
    use crate::rng::RngPlan;
    use crate::stats::Moments;

    #[derive(Default)]
    struct Counter {
        small: usize,
        big: usize,
    }

    impl PathObserver for Counter {
        fn jump(&mut self, _t: f64, from: &Point, to: &Point, kind: JumpMark) -> bool {
            match kind {
                JumpMark::SmallJump => {
                    assert!(from.dist(to) <= 0.5 + 1e-12);
                    self.small += 1
                }
                JumpMark::BigJump => {
                    assert!(from.dist(to) > 0.5);
                    self.big += 1
                }
                JumpMark::Diffusive => unreachable!(),
            }
            false
        }
    }

    #[test]
    fn checkerboard_is_rejected() {
        let mut m = ModelSpec::brownian(2);
        m.coeff = CoefficientField { family: CoeffFamily::Checkerboard, params: vec![1.0, 2.0, 0.5], dim: 2, lambda: 2.0 };
        assert!(matches!(Simulator::small_jump(&m, SimParams::new(1e-3, 0.5)), Err(Error::UnsupportedCoefficients(_))));
    }

    #[test]
    fn constant_residual_gives_poisson_big_jumps() {
        // N ≡ 4√2 for the homogeneous stable kernel at λ = 1/2.
        let m = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(0.5)).unwrap();
        let sim = Simulator::full(&m, SimParams::new(0.01, 0.5)).unwrap();
        let nu = 4.0 * 2f64.sqrt();
        let plan = RngPlan::new(3);
        let mut mom = Moments::default();
        for i in 0..4000 {
            let mut c = Counter::default();
            sim.run(&Point::ORIGIN, 1.0, &mut plan.stream(i), &mut c).unwrap();
            mom.push(c.big as f64);
        }
        assert!((mom.mean() - nu).abs() < 4.0 * mom.se(), "{} vs {nu}", mom.mean());
    }

    #[test]
    fn underflowing_rate_is_reported() {
        let m = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(1.9)).unwrap();
        let p = SimParams { dt: 1e-3, lambda: 0.5, delta: Some(1e-9) };
        assert!(matches!(Simulator::small_jump(&m, p), Err(Error::StepUnderflow { .. })));
    }
}
