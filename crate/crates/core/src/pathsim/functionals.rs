//! Path functionals: skeleton recording, exit times, hitting and suprema.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{JumpEvent, JumpMark, PathObserver, PathSkeleton, SimParams, Simulator, Termination};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Point, Region};
use crate::model::moments::KernelSplit;
use crate::model::ModelSpec;

/// Records the full skeleton.
#[derive(Clone, Debug, Default)]
pub struct SkeletonRecorder {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub jump_marks: Vec<JumpMark>,
    pub jumps: Vec<JumpEvent>,
}

impl SkeletonRecorder {
    pub fn start(x0: &Point) -> Self {
        SkeletonRecorder { times: vec![0.0], states: vec![*x0], jump_marks: vec![JumpMark::Diffusive], jumps: vec![] }
    }

    pub fn finish(self, terminated_by: Termination) -> PathSkeleton {
        PathSkeleton {
            times: self.times,
            states: self.states,
            jump_marks: self.jump_marks,
            jumps: self.jumps,
            terminated_by,
        }
    }
}

impl PathObserver for SkeletonRecorder {
    fn diffuse(&mut self, _t0: f64, _from: &Point, t1: f64, to: &Point) -> bool {
        self.times.push(t1);
        self.states.push(*to);
        self.jump_marks.push(JumpMark::Diffusive);
        false
    }

    fn jump(&mut self, t: f64, from: &Point, to: &Point, kind: JumpMark) -> bool {
        self.jumps.push(JumpEvent { t, from: *from, to: *to, kind });
        let last = self.states.len() - 1;
        self.states[last] = *to;
        self.jump_marks[last] = kind;
        false
    }
}

/// Path of the small-jump process `Y^λ`.
pub fn simulate_small_jump<R: Rng + ?Sized>(
    model: &ModelSpec,
    x0: &Point,
    horizon: f64,
    dt: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<PathSkeleton> {
    let sim = Simulator::small_jump(model, SimParams::new(dt, lambda))?;
    let mut rec = SkeletonRecorder::start(x0);
    let term = sim.run(x0, horizon, rng, &mut rec)?;
    Ok(rec.finish(term))
}

/// Path of the full process: `Y^λ` with big jumps inserted at Meyer alarms.
pub fn meyer_augment<R: Rng + ?Sized>(
    model: &ModelSpec,
    split: &KernelSplit,
    x0: &Point,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<PathSkeleton> {
    let sim = Simulator::with_split(model, split.clone(), SimParams::new(dt, split.lambda_trunc))?;
    let mut rec = SkeletonRecorder::start(x0);
    let term = sim.run(x0, horizon, rng, &mut rec)?;
    Ok(rec.finish(term))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub tau: f64,
    pub exit_state: Point,
    pub exited: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub hit_before_exit: bool,
    pub t_hit: Option<f64>,
}

/// Stops at the first observed state outside `ball`.
#[derive(Clone, Debug)]
pub struct ExitObserver {
    pub ball: Ball,
    pub record: Option<ExitRecord>,
}

impl ExitObserver {
    pub fn new(ball: Ball) -> Self {
        ExitObserver { ball, record: None }
    }

    fn check(&mut self, t: f64, to: &Point) -> bool {
        if self.ball.contains(to) {
            return false;
        }
        self.record = Some(ExitRecord { tau: t, exit_state: *to, exited: true });
        true
    }
}

impl PathObserver for ExitObserver {
    fn diffuse(&mut self, _t0: f64, _from: &Point, t1: f64, to: &Point) -> bool {
        self.check(t1, to)
    }

    fn jump(&mut self, t: f64, _from: &Point, to: &Point, _kind: JumpMark) -> bool {
        self.check(t, to)
    }
}

/// Records the first entrance into `target`; stops on hit or exit from `ball`.
///
/// Diffusive steps count as hits when the straight segment between the two
/// observed states meets the target; jumps count only by their landing point.
#[derive(Clone, Debug)]
pub struct HittingObserver {
    pub target: Region,
    pub exit: ExitObserver,
    pub dim: usize,
    pub t_hit: Option<f64>,
}

impl PathObserver for HittingObserver {
    fn diffuse(&mut self, t0: f64, from: &Point, t1: f64, to: &Point) -> bool {
        if self.target.meets_segment(from, to, self.dim) {
            self.t_hit = Some(t1);
            return true;
        }
        let _ = t0;
        self.exit.diffuse(t0, from, t1, to)
    }

    fn jump(&mut self, t: f64, from: &Point, to: &Point, kind: JumpMark) -> bool {
        if self.target.contains(to, self.dim) {
            self.t_hit = Some(t);
            return true;
        }
        self.exit.jump(t, from, to, kind)
    }
}

/// Running maximum of `|X_s − x0|` over observed states, including pre-jump states.
#[derive(Clone, Debug)]
pub struct SupObserver {
    pub x0: Point,
    pub sup: f64,
}

impl PathObserver for SupObserver {
    fn diffuse(&mut self, _t0: f64, _from: &Point, _t1: f64, to: &Point) -> bool {
        self.sup = self.sup.max(to.dist(&self.x0));
        false
    }

    fn jump(&mut self, _t: f64, _from: &Point, to: &Point, _kind: JumpMark) -> bool {
        self.sup = self.sup.max(to.dist(&self.x0));
        false
    }
}

fn censored(horizon: f64, x: Point) -> ExitRecord {
    ExitRecord { tau: horizon, exit_state: x, exited: false }
}

/// First observed exit from `ball`, censored at `horizon`.
pub fn exit_time<R: Rng + ?Sized>(sim: &Simulator, x0: &Point, ball: &Ball, horizon: f64, rng: &mut R) -> Result<ExitRecord> {
    if !ball.contains(x0) {
        return Ok(ExitRecord { tau: 0.0, exit_state: *x0, exited: true });
    }
    let mut obs = (ExitObserver::new(*ball), LastState(*x0));
    sim.run(x0, horizon, rng, &mut obs)?;
    Ok(obs.0.record.unwrap_or_else(|| censored(horizon, obs.1 .0)))
}

struct LastState(Point);

impl PathObserver for LastState {
    fn diffuse(&mut self, _t0: f64, _from: &Point, _t1: f64, to: &Point) -> bool {
        self.0 = *to;
        false
    }

    fn jump(&mut self, _t: f64, _from: &Point, to: &Point, _kind: JumpMark) -> bool {
        self.0 = *to;
        false
    }
}

/// Whether the path enters `target` before leaving `ball`, with the companion exit record.
pub fn hitting_before_exit<R: Rng + ?Sized>(
    sim: &Simulator,
    x0: &Point,
    target: &Region,
    ball: &Ball,
    horizon: f64,
    rng: &mut R,
) -> Result<(HitRecord, ExitRecord)> {
    let dim = sim.dim();
    if target.contains(x0, dim) {
        let exit = exit_time(sim, x0, ball, horizon, rng)?;
        return Ok((HitRecord { hit_before_exit: true, t_hit: Some(0.0) }, exit));
    }
    if !ball.contains(x0) {
        return Err(Error::InvalidInput(format!("start {x0} lies outside the ball")));
    }
    let mut obs = (
        HittingObserver { target: target.clone(), exit: ExitObserver::new(*ball), dim, t_hit: None },
        LastState(*x0),
    );
    sim.run(x0, horizon, rng, &mut obs)?;
    let (h, last) = obs;
    let hit = HitRecord { hit_before_exit: h.t_hit.is_some(), t_hit: h.t_hit };
    // After a hit the exit is not simulated further; report it as censored at the hit.
    let exit = match (h.exit.record, h.t_hit) {
        (Some(r), _) => r,
        (None, Some(t)) => ExitRecord { tau: t, exit_state: last.0, exited: false },
        (None, None) => censored(horizon, last.0),
    };
    Ok((hit, exit))
}

/// `max_{s ≤ t_end} |X_s − x0|` over the skeleton.
pub fn sup_displacement<R: Rng + ?Sized>(sim: &Simulator, x0: &Point, t_end: f64, rng: &mut R) -> Result<f64> {
    let mut obs = SupObserver { x0: *x0, sup: 0.0 };
    sim.run(x0, t_end, rng, &mut obs)?;
    Ok(obs.sup)
}
