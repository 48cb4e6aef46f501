//! Functional inequalities on the lattice: the Nash ratio and the weighted
//! Poincaré quotient, tracked across three spacings.

use serde::{Deserialize, Serialize};

use super::{constants, ClaimId, Diagnostics, EstimateReport};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::{assemble, nash_ratio, weighted_poincare_ratio, BoundaryMode, GridSpec, RatioSweep};
use crate::model::ModelSpec;
use crate::rng::RngPlan;

/// Weighted Poincaré check on balls `B(x0, R)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareParams {
    pub x0: Point,
    pub extent: f64,
    /// Coarsest spacing; the check repeats at `h/2` and `h/4`.
    pub h: f64,
    pub radii: Vec<f64>,
    pub n_functions: usize,
    pub min_functions: usize,
    pub rel_change: f64,
}

impl Default for PoincareParams {
    fn default() -> Self {
        PoincareParams {
            x0: Point::ORIGIN,
            extent: 2.0,
            h: 1.0 / 32.0,
            radii: vec![0.25, 0.5, 1.0],
            n_functions: 200,
            min_functions: 200,
            rel_change: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NashParams {
    /// Half-width of the box; bumps are centred within half of it.
    pub extent: f64,
    pub h: f64,
    pub n_functions: usize,
    pub min_functions: usize,
    pub rel_change: f64,
}

impl Default for NashParams {
    fn default() -> Self {
        NashParams { extent: 8.0, h: 1.0 / 8.0, n_functions: 200, min_functions: 200, rel_change: 0.2 }
    }
}

struct Levels {
    extent: f64,
    h: f64,
    n_functions: usize,
    min_functions: usize,
    rel_change: f64,
}

/// Runs `f` on the three lattices with the same random stream, so each level
/// sees the same test functions.
fn three_levels(
    claim: ClaimId,
    model: &ModelSpec,
    p: &Levels,
    plan: &RngPlan,
    mut f: impl FnMut(&crate::grid::DiscreteGenerator, &mut crate::rng::StreamRng) -> Result<Vec<(f64, RatioSweep)>>,
) -> Result<EstimateReport> {
    if p.n_functions == 0 {
        return Err(Error::InvalidInput("n_functions must be at least 1".into()));
    }
    let mut diag = Diagnostics::new(&["h", "radius", "max_ratio", "n_used", "skipped"]);
    let mut levels = vec![];
    let mut used = usize::MAX;
    for k in 0..3 {
        let h = p.h / f64::from(1 << k);
        let gen = assemble(model, &GridSpec::new(model.dim, p.extent, h, BoundaryMode::Restricted))?;
        let mut best = 0.0_f64;
        for (r, s) in f(&gen, &mut plan.stream(0))? {
            diag.push(vec![h, r, s.max_ratio, s.ratios.len() as f64, s.skipped as f64]);
            best = best.max(s.max_ratio);
            used = used.min(s.ratios.len());
        }
        levels.push(best);
    }
    let fitted = constants(&[
        ("ratio_h", levels[0]),
        ("ratio_h2", levels[1]),
        ("ratio_h4", levels[2]),
        ("n_functions", used as f64),
    ]);
    let tol = constants(&[("rel_change", p.rel_change), ("min_functions", p.min_functions as f64)]);
    Ok(EstimateReport::new(claim, fitted, tol, diag))
}

/// Nash ratio `‖f‖₂^{2+4/d} / (ℰ(f,f)‖f‖₁^{4/d})` over random bumps.
pub fn check_nash(model: &ModelSpec, p: &NashParams, plan: &RngPlan) -> Result<EstimateReport> {
    if p.extent <= 4.0 {
        return Err(Error::InvalidInput("the Nash box needs half-width above 4".into()));
    }
    let levels = Levels { extent: p.extent, h: p.h, n_functions: p.n_functions, min_functions: p.min_functions, rel_change: p.rel_change };
    three_levels(ClaimId::Nash, model, &levels, plan, |gen, rng| Ok(vec![(f64::NAN, nash_ratio(gen, p.n_functions, rng)?)]))
}

/// Weighted Poincaré quotient on each ball `B(x0, R)`, `R` in `radii`.
pub fn check_poincare(model: &ModelSpec, p: &PoincareParams, plan: &RngPlan) -> Result<EstimateReport> {
    if p.radii.is_empty() || p.radii.iter().any(|&r| !(r > 0.0 && r < p.extent)) {
        return Err(Error::InvalidInput("radii must lie in (0, extent)".into()));
    }
    let levels = Levels { extent: p.extent, h: p.h, n_functions: p.n_functions, min_functions: p.min_functions, rel_change: p.rel_change };
    three_levels(ClaimId::Prop3_4, model, &levels, plan, |gen, rng| {
        p.radii.iter().map(|&r| Ok((r, weighted_poincare_ratio(gen, &p.x0, r, p.n_functions, rng)?))).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_poincare_is_grid_stable() {
        let p = PoincareParams { h: 1.0 / 16.0, radii: vec![0.5], n_functions: 20, min_functions: 20, ..Default::default() };
        let r = check_poincare(&ModelSpec::brownian(1), &p, &RngPlan::new(2)).unwrap();
        assert!(r.pass, "{:?}", r.fitted_constants);
        assert!(r.fitted("ratio_h4") < 1.0);
    }

    #[test]
    fn too_few_functions_fail() {
        let p = PoincareParams { h: 1.0 / 16.0, radii: vec![0.5], n_functions: 5, ..Default::default() };
        let r = check_poincare(&ModelSpec::brownian(1), &p, &RngPlan::new(2)).unwrap();
        assert!(!r.pass);
    }
}
