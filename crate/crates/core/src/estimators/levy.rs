//! Lévy system identity: expected number of jumps from `A` into `B` against
//! the expected occupation integral of `∫_B J(X_s, y) dy` over `A`.

use serde::{Deserialize, Serialize};

use super::{constants, ClaimId, Diagnostics, EstimateReport};
use crate::error::{Error, Result};
use crate::exec::{Executor, Merge};
use crate::geometry::{Point, Region};
use crate::model::{JumpKernel, ModelSpec};
use crate::pathsim::{JumpMark, PathObserver, SimParams, Simulator};
use crate::quadrature::gl16;
use crate::rng::RngPlan;
use crate::stats::Moments;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevyParams {
    pub x0: Point,
    pub a: Region,
    pub b: Region,
    pub t: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub lambda: f64,
    /// Interpolation nodes per axis of the table of `∫_B J(x, y) dy` on `A`.
    pub table_points: usize,
    pub se_margin: f64,
}

impl Default for LevyParams {
    fn default() -> Self {
        LevyParams {
            x0: Point::new1(-0.75),
            a: Region::Box { lo: Point::new2(-1.0, -1.0), hi: Point::new2(-0.5, 1.0) },
            b: Region::Box { lo: Point::new2(0.5, -1.0), hi: Point::new2(1.0, 1.0) },
            t: 1.0,
            n_paths: 1_000_000,
            dt: 1e-3,
            lambda: 0.5,
            table_points: 2049,
            se_margin: 3.0,
        }
    }
}

fn corners(r: &Region) -> Result<(Point, Point)> {
    match r {
        Region::Box { lo, hi } => Ok((*lo, *hi)),
        _ => Err(Error::InvalidInput("Lévy system sets must be boxes".into())),
    }
}

fn box_distance(a: (Point, Point), b: (Point, Point), dim: usize) -> f64 {
    (0..dim)
        .map(|k| {
            let gap = (b.0 .0[k] - a.1 .0[k]).max(a.0 .0[k] - b.1 .0[k]).max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

/// Panel edges on `[lo, hi]`: uniform, plus unit-cell boundaries where the
/// kernel may be discontinuous.
fn panels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let mut c = lo.floor() + 1.0;
    while c < hi {
        e.push(c);
        c += 1.0;
    }
    e.sort_by(|a, b| a.total_cmp(b));
    e.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    e
}

/// `∫_B J(x, y) dy` by composite Gauss–Legendre.
pub(crate) fn mass_into(kernel: &JumpKernel, x: &Point, b: (Point, Point)) -> f64 {
    let g = gl16();
    let e0 = panels(b.0 .0[0], b.1 .0[0], 32);
    let mut s = 0.0;
    for w0 in e0.windows(2) {
        if kernel.dim == 1 {
            s += g.integrate(w0[0], w0[1], |y| kernel.eval(x, &Point::new1(y)));
        } else {
            let e1 = panels(b.0 .0[1], b.1 .0[1], 16);
            for w1 in e1.windows(2) {
                s += g.integrate(w0[0], w0[1], |y0| g.integrate(w1[0], w1[1], |y1| kernel.eval(x, &Point::new2(y0, y1))));
            }
        }
    }
    s
}

/// Tabulated `x ↦ ∫_B J(x, y) dy` on the box `A`, multilinear in between.
struct MassTable {
    dim: usize,
    lo: Point,
    step: [f64; 2],
    n: usize,
    values: Vec<f64>,
}

impl MassTable {
    fn build(kernel: &JumpKernel, a: (Point, Point), b: (Point, Point), n: usize, exec: &Executor) -> Result<Self> {
        let dim = kernel.dim;
        let mut step = [0.0; 2];
        for k in 0..dim {
            step[k] = (a.1 .0[k] - a.0 .0[k]) / (n - 1) as f64;
        }
        let total = n.pow(dim as u32);
        let values = exec.map(total, |i| {
            let mut x = Point::new1(a.0 .0[0] + (i % n) as f64 * step[0]);
            if dim == 2 {
                x.0[1] = a.0 .0[1] + (i / n) as f64 * step[1];
            }
            Ok(mass_into(kernel, &x, b))
        })?;
        Ok(MassTable { dim, lo: a.0, step, n, values })
    }

    fn eval(&self, x: &Point) -> f64 {
        let mut idx = [0usize; 2];
        let mut frac = [0.0; 2];
        for k in 0..self.dim {
            let s = if self.step[k] > 0.0 { (x.0[k] - self.lo.0[k]) / self.step[k] } else { 0.0 };
            let s = s.clamp(0.0, (self.n - 1) as f64);
            idx[k] = (s.floor() as usize).min(self.n.saturating_sub(2));
            frac[k] = s - idx[k] as f64;
        }
        if self.dim == 1 {
            let v = &self.values;
            return v[idx[0]] * (1.0 - frac[0]) + v[(idx[0] + 1).min(self.n - 1)] * frac[0];
        }
        let at = |i: usize, j: usize| self.values[j.min(self.n - 1) * self.n + i.min(self.n - 1)];
        let (i, j) = (idx[0], idx[1]);
        let (fx, fy) = (frac[0], frac[1]);
        at(i, j) * (1.0 - fx) * (1.0 - fy) + at(i + 1, j) * fx * (1.0 - fy) + at(i, j + 1) * (1.0 - fx) * fy
            + at(i + 1, j + 1) * fx * fy
    }
}

struct LevyObserver<'a> {
    a: &'a Region,
    b: &'a Region,
    dim: usize,
    table: &'a MassTable,
    count: f64,
    occupation: f64,
}

impl LevyObserver<'_> {
    fn g(&self, x: &Point) -> f64 {
        if self.a.contains(x, self.dim) {
            self.table.eval(x)
        } else {
            0.0
        }
    }
}

impl PathObserver for LevyObserver<'_> {
    fn diffuse(&mut self, t0: f64, from: &Point, t1: f64, to: &Point) -> bool {
        self.occupation += 0.5 * (self.g(from) + self.g(to)) * (t1 - t0);
        false
    }

    fn jump(&mut self, _t: f64, from: &Point, to: &Point, _kind: JumpMark) -> bool {
        if self.a.contains(from, self.dim) && self.b.contains(to, self.dim) {
            self.count += 1.0;
        }
        false
    }
}

#[derive(Default)]
struct LevyTally {
    lhs: Moments,
    rhs: Moments,
}

impl Merge for LevyTally {
    fn merge(&mut self, o: Self) {
        self.lhs.merge(o.lhs);
        self.rhs.merge(o.rhs);
    }
}

/// Both sides of the Lévy system identity from the same paths of the full
/// process; the occupation integral uses the trapezoid rule along each
/// continuous stretch of the path.
pub fn check_levy_system(model: &ModelSpec, p: &LevyParams, plan: &RngPlan, exec: &Executor) -> Result<EstimateReport> {
    let dim = model.dim;
    let (a, b) = (corners(&p.a)?, corners(&p.b)?);
    let dist = box_distance(a, b, dim);
    if !(dist > 0.0) {
        return Err(Error::InvalidInput("A and B must be at positive distance".into()));
    }
    if p.table_points < 2 || !(p.t > 0.0) {
        return Err(Error::InvalidInput("need t > 0 and at least two table points".into()));
    }
    let sim = Simulator::full(model, SimParams::new(p.dt, p.lambda))?;
    if dist <= sim.delta() {
        return Err(Error::Estimator(format!(
            "dist(A, B) = {dist} is below the resolved jump size δ = {}; shrink δ",
            sim.delta()
        )));
    }
    let kernel = model.jump_kernel();
    let table = MassTable::build(&kernel, a, b, p.table_points, exec)?;
    let tally = exec.fold(p.n_paths, LevyTally::default, |i, acc| {
        let mut obs = LevyObserver { a: &p.a, b: &p.b, dim, table: &table, count: 0.0, occupation: 0.0 };
        sim.run(&p.x0, p.t, &mut plan.stream(i as u64), &mut obs)?;
        acc.lhs.push(obs.count);
        acc.rhs.push(obs.occupation);
        Ok(())
    })?;
    let mut diag = Diagnostics::new(&["side", "mean", "se", "n_paths"]);
    diag.push(vec![0.0, tally.lhs.mean(), tally.lhs.se(), p.n_paths as f64]);
    diag.push(vec![1.0, tally.rhs.mean(), tally.rhs.se(), p.n_paths as f64]);
    let fitted = constants(&[
        ("lhs", tally.lhs.mean()),
        ("rhs", tally.rhs.mean()),
        ("se_lhs", tally.lhs.se()),
        ("se_rhs", tally.rhs.se()),
    ]);
    Ok(EstimateReport::new(ClaimId::Prop5_1, fitted, constants(&[("se_margin", p.se_margin)]), diag)
        .with_note("diagnostic side 0 is the jump count, side 1 the occupation integral"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::JumpKernelSpec;

    #[test]
    fn mass_into_interval_closed_form() {
        // ∫_{1/2}^{1} (y − x)^{−3/2} dy = 2[(1/2 − x)^{−1/2} − (1 − x)^{−1/2}].
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5), 1);
        let b = (Point::new1(0.5), Point::new1(1.0));
        for x in [-1.0_f64, -0.75, -0.5] {
            let exact = 2.0 * ((0.5 - x).powf(-0.5) - (1.0 - x).powf(-0.5));
            assert!((mass_into(&k, &Point::new1(x), b) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn table_interpolates_smooth_mass() {
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5).with_modulation(0.5, 1.5), 1);
        let a = (Point::new1(-1.0), Point::new1(-0.5));
        let b = (Point::new1(0.5), Point::new1(1.0));
        let t = MassTable::build(&k, a, b, 513, &Executor::sequential()).unwrap();
        for x in [-0.97, -0.8, -0.61] {
            let p = Point::new1(x);
            assert!((t.eval(&p) - mass_into(&k, &p, b)).abs() < 1e-6);
        }
    }

    #[test]
    fn table_in_one_dimension_ignores_padding() {
        // The 2D padding of the default boxes must not leak into 1D distances.
        let k = JumpKernel::new(JumpKernelSpec::stable(0.5), 1);
        let p = LevyParams::default();
        let (a, b) = (corners(&p.a).unwrap(), corners(&p.b).unwrap());
        let t = MassTable::build(&k, a, b, 65, &Executor::sequential()).unwrap();
        let x = -0.75_f64;
        let exact = 2.0 * ((0.5 - x).powf(-0.5) - (1.0 - x).powf(-0.5));
        assert!((t.eval(&Point::new1(x)) - exact).abs() < 1e-6);
    }

    #[test]
    fn zero_kernel_gives_zero_sides() {
        let m = ModelSpec::brownian(1);
        let p = LevyParams { n_paths: 200, dt: 0.01, ..Default::default() };
        let r = check_levy_system(&m, &p, &RngPlan::new(1), &Executor::sequential()).unwrap();
        assert_eq!(r.fitted("lhs"), 0.0);
        assert_eq!(r.fitted("rhs"), 0.0);
    }

    #[test]
    fn touching_sets_are_rejected() {
        let m = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(0.5)).unwrap();
        let p = LevyParams {
            b: Region::Box { lo: Point::new2(-0.5, -1.0), hi: Point::new2(0.0, 1.0) },
            n_paths: 10,
            ..Default::default()
        };
        assert!(check_levy_system(&m, &p, &RngPlan::new(1), &Executor::sequential()).is_err());
    }
}
