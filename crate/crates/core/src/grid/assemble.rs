//! Assembly of the lattice generator.

use std::sync::OnceLock;

use super::{BoundaryMode, DiscreteGenerator, GridSpec, LocalEdge};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::moments::local_second_moment;
use crate::model::{JumpKernel, ModelSpec};
use crate::quadrature::{gl16, gl8};

/// `∫_{cell(x + d)} J(x, y) dy` averaged with the reverse direction, where
/// `cell(c) = c + [−h/2, h/2]^d`. Used on the first lattice shell, where point
/// evaluation misrepresents the near-singular mass.
pub fn cell_averaged_weight(kernel: &JumpKernel, x: &Point, d: &Point, h: f64) -> f64 {
    let y = *x + *d;
    0.5 * (cell_integral(kernel, x, &y, h) + cell_integral(kernel, &y, x, h))
}

fn cell_integral(kernel: &JumpKernel, from: &Point, center: &Point, h: f64) -> f64 {
    let half = 0.5 * h;
    if kernel.dim == 1 {
        let c = center.0[0];
        let f = |y: f64| kernel.eval(from, &Point::new1(y));
        return gl16().integrate(c - half, c, f) + gl16().integrate(c, c + half, f);
    }
    let rule = gl8();
    let mut total = 0.0;
    for (a0, b0) in [(center.0[0] - half, center.0[0]), (center.0[0], center.0[0] + half)] {
        for (a1, b1) in [(center.0[1] - half, center.0[1]), (center.0[1], center.0[1] + half)] {
            total += rule.integrate(a0, b0, |u| rule.integrate(a1, b1, |v| kernel.eval(from, &Point::new2(u, v))));
        }
    }
    total
}

/// Per-coordinate second moment `(1/d)∫_{[−h/2, h/2]^d} |u|² J(x, x+u) du` of
/// the jumps that stay within the node's own cell.
pub fn subcell_moment(kernel: &JumpKernel, x: &Point, h: f64) -> f64 {
    if kernel.is_zero() {
        return 0.0;
    }
    let half = 0.5 * h;
    let ball = local_second_moment(kernel, x, half).0;
    if kernel.dim == 1 {
        return ball;
    }
    // Corners of the square outside the inscribed disc.
    let rule = gl8();
    let panels = 8;
    let w = h / panels as f64;
    let mut corners = 0.0;
    for p in 0..panels {
        for q in 0..panels {
            let (a0, a1) = (-half + p as f64 * w, -half + q as f64 * w);
            corners += rule.integrate(a0, a0 + w, |u| {
                rule.integrate(a1, a1 + w, |v| {
                    let r2 = u * u + v * v;
                    if r2 > half * half {
                        r2 * kernel.eval(x, &(*x + Point::new2(u, v)))
                    } else {
                        0.0
                    }
                })
            });
        }
    }
    0.5 * (ball + corners)
}

/// Minimum-image displacements from `a` to `b`, all tied images included.
fn images(grid: &GridSpec, a: &Point, b: &Point) -> Vec<Point> {
    let d = grid.displacement(a, b);
    if grid.boundary_mode == BoundaryMode::Restricted {
        return vec![d];
    }
    let l = grid.extent;
    let mut out = vec![d];
    for k in 0..grid.dim {
        if (d.0[k].abs() - l).abs() < 1e-9 * grid.h {
            let mut extra = Vec::with_capacity(out.len());
            for p in &out {
                let mut q = *p;
                q.0[k] = -p.0[k];
                extra.push(q);
            }
            out.extend(extra);
        }
    }
    out
}

fn first_shell(d: &Point, h: f64, dim: usize) -> bool {
    (0..dim).map(|k| d.0[k].abs()).fold(0.0, f64::max) <= h * (1.0 + 1e-9)
}

/// Jump weight between lattice points `x` and `x + d`.
fn pair_weight(kernel: &JumpKernel, x: &Point, d: &Point, h: f64, vol: f64, dim: usize) -> f64 {
    if first_shell(d, h, dim) {
        cell_averaged_weight(kernel, x, d, h)
    } else {
        let y = *x + *d;
        0.5 * (kernel.eval(x, &y) + kernel.eval(&y, x)) * vol
    }
}

pub fn assemble(model: &ModelSpec, grid: &GridSpec) -> Result<DiscreteGenerator> {
    assemble_with_kernel(model, &model.jump_kernel(), grid)
}

/// Assembles the model's diffusion with an explicit (possibly cut) kernel.
pub fn assemble_with_kernel(model: &ModelSpec, kernel: &JumpKernel, grid: &GridSpec) -> Result<DiscreteGenerator> {
    grid.validate()?;
    if grid.dim != model.dim {
        return Err(Error::InvalidInput(format!("grid dimension {} differs from model dimension {}", grid.dim, model.dim)));
    }
    if !model.coeff.is_diagonal() {
        return Err(Error::UnsupportedCoefficients("off-diagonal"));
    }
    let kernel = kernel.clone();
    if kernel.spec.asym_perturbation != 0.0 {
        return Err(Error::InvalidInput("asymmetric kernels have no symmetric generator".into()));
    }
    let n = grid.n_nodes();
    let dim = grid.dim;
    let h = grid.h;
    let vol = grid.cell_volume();
    let nodes: Vec<Point> = (0..n).map(|i| grid.coord(i)).collect();
    let mut rows: Vec<Vec<(u32, f64, f64)>> = vec![Vec::new(); n];

    // Diffusion edges with the sub-cell jump moment folded in.
    let sub: Vec<f64> = nodes.iter().map(|x| subcell_moment(&kernel, x, h)).collect();
    let mut local_edges = Vec::new();
    let side = grid.n_side();
    for i in 0..n {
        let m = grid.multi_index(i);
        for k in 0..dim {
            let mut mj = m;
            if m[k] + 1 < side {
                mj[k] = m[k] + 1;
            } else if grid.boundary_mode == BoundaryMode::Periodic && side > 2 {
                mj[k] = 0;
            } else {
                continue;
            }
            let j = grid.flat_index(mj);
            let mut mid = nodes[i];
            mid.0[k] += 0.5 * h;
            let eps = 1e-9 * h;
            let (mut lo, mut hi) = (mid, mid);
            lo.0[k] -= eps;
            hi.0[k] += eps;
            let a_e = 0.5 * (model.coeff.matrix(&lo)[k][k] + model.coeff.matrix(&hi)[k][k]);
            let s = 0.5 * (sub[i] + sub[j]);
            let rate = (a_e + s) / (2.0 * h * h);
            let subcell = s / (2.0 * h * h);
            if !rate.is_finite() {
                return Err(Error::NonFinite { what: "edge conductance", point: mid });
            }
            local_edges.push(LocalEdge { i: i as u32, j: j as u32, rate, subcell });
            rows[i].push((j as u32, 0.0, rate));
            rows[j].push((i as u32, 0.0, rate));
        }
    }

    // Pairwise jump weights.
    let cutoff = kernel.support_radius();
    let mut tail_mass: f64 = 0.0;
    if !kernel.is_zero() {
        for i in 0..n {
            for j in (i + 1)..n {
                let imgs = images(grid, &nodes[i], &nodes[j]);
                let mut w = 0.0;
                for d in &imgs {
                    if d.norm() <= cutoff {
                        w += pair_weight(&kernel, &nodes[i], d, h, vol, dim);
                    }
                }
                w /= imgs.len() as f64;
                if w == 0.0 {
                    continue;
                }
                if !w.is_finite() {
                    return Err(Error::NonFinite { what: "jump weight", point: nodes[i] });
                }
                rows[i].push((j as u32, w, 0.0));
                rows[j].push((i as u32, w, 0.0));
            }
        }
        if grid.boundary_mode == BoundaryMode::Periodic {
            tail_mass = kernel.far_tail(grid.extent);
        }
    }

    // Killing: exterior lattice sum plus the averaged far tail.
    let mut killing = vec![0.0; n];
    if grid.boundary_mode == BoundaryMode::Restricted && !kernel.is_zero() {
        let diam = 2.0 * grid.extent * (dim as f64).sqrt();
        let r_c = if dim == 1 { 64.0_f64.max(diam + h) } else { 4.0_f64.max(diam + h) };
        let reach = (r_c / h).ceil() as i64;
        let side = side as i64;
        for (i, x) in nodes.iter().enumerate() {
            let mut kill = 0.0;
            let m = grid.multi_index(i);
            let range = |c: usize| (c as i64 - reach)..=(c as i64 + reach);
            let ys: Vec<i64> = if dim == 1 { vec![0] } else { range(m[1]).collect() };
            for a in range(m[0]) {
                for &b in &ys {
                    let inside = (0..side).contains(&a) && (dim == 1 || (0..side).contains(&b));
                    if inside {
                        continue;
                    }
                    let mut d = Point::ORIGIN;
                    d.0[0] = (a - m[0] as i64) as f64 * h;
                    if dim == 2 {
                        d.0[1] = (b - m[1] as i64) as f64 * h;
                    }
                    if d.norm() <= r_c.min(cutoff) {
                        kill += pair_weight(&kernel, x, &d, h, vol, dim);
                    }
                }
            }
            killing[i] = kill + kernel.far_tail(r_c);
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut jump = Vec::new();
    let mut rates = Vec::new();
    row_ptr.push(0);
    for mut r in rows {
        r.sort_by_key(|e| e.0);
        let mut k = 0;
        while k < r.len() {
            let (c, mut wj, mut wl) = r[k];
            while k + 1 < r.len() && r[k + 1].0 == c {
                k += 1;
                wj += r[k].1;
                wl += r[k].2;
            }
            cols.push(c);
            jump.push(wj);
            rates.push(wj + wl);
            k += 1;
        }
        row_ptr.push(cols.len());
    }
    Ok(DiscreteGenerator {
        grid: grid.clone(),
        nodes,
        local_edges,
        row_ptr,
        cols,
        jump,
        rates,
        killing,
        tail_mass,
        eigen: OnceLock::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::JumpKernelSpec;
    use crate::rng::RngPlan;
    use rand::Rng;

    #[test]
    fn zero_kernel_is_second_difference() {
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 1.0, 0.25, BoundaryMode::Periodic)).unwrap();
        assert_eq!(g.n(), 8);
        assert!(g.jump.iter().all(|&w| w == 0.0));
        let f: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let lf = g.apply(&f);
        // Interior second difference of i² is 2, scaled by 1/(2h²) = 8.
        assert!((lf[3] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_identity() {
        let m = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(0.5)).unwrap();
        let g = assemble(&m, &GridSpec::new(1, 2.0, 0.125, BoundaryMode::Restricted)).unwrap();
        let mut rng = RngPlan::new(4).stream(0);
        for _ in 0..100 {
            let f: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = -g.inner(&g.apply(&f), &f);
            let rhs = g.energy(&f);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn periodic_rows_sum_to_zero_and_weights_symmetric() {
        let m = ModelSpec::unit_diffusion(2, JumpKernelSpec::stable(1.0).with_modulation(0.5, 1.5)).unwrap();
        let g = assemble(&m, &GridSpec::new(2, 1.0, 0.25, BoundaryMode::Periodic)).unwrap();
        let ones = vec![1.0; g.n()];
        assert!(g.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        for i in 0..g.n() {
            for (j, q) in g.row(i) {
                let back = g.row(j).find(|&(k, _)| k == i).unwrap().1;
                assert_eq!(q, back);
            }
        }
    }

    #[test]
    fn node_cap_enforced() {
        let mut grid = GridSpec::new(2, 4.0, 1.0 / 64.0, BoundaryMode::Restricted);
        grid.node_cap = 1000;
        assert!(matches!(assemble(&ModelSpec::brownian(2), &grid), Err(Error::NodeCap { .. })));
    }
}
