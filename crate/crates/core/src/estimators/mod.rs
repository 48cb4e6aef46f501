//! Verification procedures, one per claim, and their reports.
//!
//! Each procedure returns an [`EstimateReport`] whose `pass` flag is
//! recomputed from the fitted constants and tolerances by [`claim_rule`], so
//! a report can be re-judged from its serialized numbers alone.

mod calibration;
mod density;
mod exit;
mod harmonic;
mod heat_bounds;
mod inequality;
mod levy;

pub use calibration::{chain_vs_oracle, gaussian_calibration, GaussianCalibration, OracleComparison};
pub use density::{estimate_density, sample_marginals, Binning, DensityEstimate, MarginalSamples};
pub use exit::{check_exit_scaling, check_hitting, check_tightness, ExitScalingParams, HittingParams, TightnessParams};
pub use harmonic::{
    check_harmonic_measure, check_harnack, fit_hoelder, HarmonicMeasureParams, HarnackParams, HoelderParams,
};
pub use heat_bounds::{check_lower_bound, check_upper_bound, LowerBoundParams, UpperBoundParams};
pub use inequality::{check_nash, check_poincare, NashParams, PoincareParams};
pub use levy::{check_levy_system, LevyParams};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimId {
    #[serde(rename = "thm_2_4")]
    Thm2_4,
    #[serde(rename = "thm_2_5")]
    Thm2_5,
    #[serde(rename = "thm_2_6")]
    Thm2_6,
    #[serde(rename = "thm_2_7")]
    Thm2_7,
    #[serde(rename = "prop_3_2")]
    Prop3_2,
    #[serde(rename = "prop_3_4")]
    Prop3_4,
    #[serde(rename = "prop_4_1a")]
    Prop4_1a,
    #[serde(rename = "prop_4_1b")]
    Prop4_1b,
    #[serde(rename = "prop_5_1")]
    Prop5_1,
    #[serde(rename = "prop_6_1")]
    Prop6_1,
    Nash,
}

impl ClaimId {
    pub const ALL: [ClaimId; 11] = [
        ClaimId::Thm2_4,
        ClaimId::Thm2_5,
        ClaimId::Thm2_6,
        ClaimId::Thm2_7,
        ClaimId::Prop3_2,
        ClaimId::Prop3_4,
        ClaimId::Prop4_1a,
        ClaimId::Prop4_1b,
        ClaimId::Prop5_1,
        ClaimId::Prop6_1,
        ClaimId::Nash,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimId::Thm2_4 => "thm_2_4",
            ClaimId::Thm2_5 => "thm_2_5",
            ClaimId::Thm2_6 => "thm_2_6",
            ClaimId::Thm2_7 => "thm_2_7",
            ClaimId::Prop3_2 => "prop_3_2",
            ClaimId::Prop3_4 => "prop_3_4",
            ClaimId::Prop4_1a => "prop_4_1a",
            ClaimId::Prop4_1b => "prop_4_1b",
            ClaimId::Prop5_1 => "prop_5_1",
            ClaimId::Prop6_1 => "prop_6_1",
            ClaimId::Nash => "nash",
        }
    }

    /// One-line statement of what the procedure checks.
    pub fn summary(self) -> &'static str {
        match self {
            ClaimId::Thm2_4 => "truncated-jump heat kernel: p(t,x,y) t^{d/2} e^{|x-y|} bounded, stable under refinement",
            ClaimId::Thm2_5 => "near-diagonal lower bound p(t,x,y) >= c t^{-d/2} on |x-y|^2 <= theta t",
            ClaimId::Thm2_6 => "Hoelder modulus of harmonic functions with a refinement-stable constant",
            ClaimId::Thm2_7 => "elliptic Harnack ratio bounded over nonnegative boundary data",
            ClaimId::Prop3_2 => "P(sup_{s<=t0 r^2} |X_s - x| > r) <= 1/2 with t0 independent of r",
            ClaimId::Prop3_4 => "weighted Poincare ratio stable under grid refinement",
            ClaimId::Prop4_1a => "mean exit time from B(x0,r) scales like r^2",
            ClaimId::Prop4_1b => "P(T_A < tau) >= c |A| / r^d",
            ClaimId::Prop5_1 => "Levy system: expected jump count from A to B equals occupation integral of J",
            ClaimId::Prop6_1 => "harmonic measure comparability E^x0 H <= c k_r E^z H",
            ClaimId::Nash => "Nash inequality ratio stable under grid refinement",
        }
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClaimId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClaimId::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown claim id {s:?}")))
    }
}

/// Named numbers in a stable order.
pub type Constants = BTreeMap<String, f64>;

/// Per-sample numeric table; rows have one value per column.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Diagnostics {
    pub fn new(columns: &[&str]) -> Self {
        Diagnostics { columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a header line; floats use Rust's shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub claim_id: ClaimId,
    pub fitted_constants: Constants,
    pub tolerance: Constants,
    pub pass: bool,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(claim_id: ClaimId, fitted_constants: Constants, tolerance: Constants, diagnostics: Diagnostics) -> Self {
        let pass = claim_rule(claim_id, &fitted_constants, &tolerance);
        EstimateReport { claim_id, fitted_constants, tolerance, pass, diagnostics, notes: vec![] }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn fitted(&self, key: &str) -> f64 {
        get(&self.fitted_constants, key)
    }

    /// Whether `pass` agrees with the claim rule applied to the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.pass == claim_rule(self.claim_id, &self.fitted_constants, &self.tolerance)
    }
}

pub(crate) fn constants(pairs: &[(&str, f64)]) -> Constants {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn get(m: &Constants, key: &str) -> f64 {
    m.get(key).copied().unwrap_or(f64::NAN)
}

fn rel_change(a: f64, b: f64) -> f64 {
    ((b - a) / a).abs()
}

/// Pass rule of each claim. Missing or non-finite inputs fail.
pub fn claim_rule(claim: ClaimId, f: &Constants, tol: &Constants) -> bool {
    let v = |k: &str| get(f, k);
    let t = |k: &str| get(tol, k);
    let finite = |keys: &[&str]| keys.iter().all(|k| v(k).is_finite());
    match claim {
        ClaimId::Thm2_4 => {
            finite(&["c_observed", "c_observed_refined", "c_observed_coarse_t"])
                && v("c_observed") > 0.0
                && rel_change(v("c_observed"), v("c_observed_refined")) < t("rel_change")
                && v("c_observed_refined") <= v("c_observed_coarse_t") * (1.0 + t("rel_change"))
        }
        ClaimId::Thm2_5 => {
            finite(&["theta", "c1", "c1_se"]) && v("theta") > 0.0 && v("c1") - t("se_margin") * v("c1_se") > 0.0
        }
        ClaimId::Thm2_6 => {
            finite(&["alpha", "c_holder", "c_holder_refined"])
                && v("alpha") > 0.0
                && v("alpha") <= 1.0
                && rel_change(v("c_holder"), v("c_holder_refined")) < t("rel_change")
        }
        ClaimId::Thm2_7 => {
            let base = finite(&["c_harnack", "c_harnack_doubled", "inf_u_min"])
                && v("inf_u_min") > 0.0
                && v("c_harnack_doubled") / v("c_harnack") - 1.0 < t("growth");
            // A demonstrated counterexample means the inequality fails for this model.
            let amplified = f.get("counterexample_amplification").is_some_and(|a| !(*a < t("amplification")));
            base && !amplified
        }
        ClaimId::Prop3_2 => finite(&["t0", "t0_cv"]) && v("t0") > 0.0 && v("t0_cv") < t("cv_max"),
        ClaimId::Prop3_4 | ClaimId::Nash => {
            finite(&["ratio_h", "ratio_h2", "ratio_h4", "n_functions"])
                && v("ratio_h") > 0.0
                && rel_change(v("ratio_h"), v("ratio_h2")) < t("rel_change")
                && rel_change(v("ratio_h2"), v("ratio_h4")) < t("rel_change")
                && v("n_functions") >= t("min_functions")
        }
        ClaimId::Prop4_1a => {
            finite(&["slope", "c1", "c2", "censored_fraction", "control_max_z"])
                && (v("slope") - t("slope_target")).abs() <= t("slope_tol")
                && v("c2") > 0.0
                && v("censored_fraction") <= t("censored_max")
                && v("control_max_z") <= t("se_margin")
        }
        ClaimId::Prop4_1b => {
            finite(&["c3", "c3_se", "decay_slope", "decay_slope_se", "control_max_z"])
                && v("c3") - t("se_margin") * v("c3_se") > 0.0
                && v("decay_slope") - t("se_margin") * v("decay_slope_se") <= 0.0
                && v("control_max_z") <= t("se_margin")
        }
        ClaimId::Prop5_1 => {
            finite(&["lhs", "rhs", "se_lhs", "se_rhs"])
                && (v("lhs") - v("rhs")).abs() <= t("se_margin") * (v("se_lhs") + v("se_rhs"))
        }
        ClaimId::Prop6_1 => {
            finite(&["c_observed", "c_observed_refined"])
                && rel_change(v("c_observed"), v("c_observed_refined")) < t("rel_change")
        }
    }
}
