//! Experiment configuration: a strict, versioned JSON document.

use std::path::{Path, PathBuf};

use dirjump::estimators::{
    ClaimId, ExitScalingParams, HarmonicMeasureParams, HarnackParams, HittingParams, HoelderParams, LevyParams,
    LowerBoundParams, NashParams, PoincareParams, TightnessParams, UpperBoundParams,
};
use dirjump::grid::GridSpec;
use dirjump::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest path count accepted for a Monte Carlo claim.
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Monte Carlo settings shared by every path-based claim; each field, when
/// set, overrides the corresponding per-claim value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    /// Absolute time step for the density and Lévy claims.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// Per-claim parameter blocks; a missing block means defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClaimParams {
    pub thm_2_4: UpperBoundParams,
    pub thm_2_5: LowerBoundParams,
    pub thm_2_6: HoelderParams,
    pub thm_2_7: HarnackParams,
    pub prop_3_2: TightnessParams,
    pub prop_3_4: PoincareParams,
    pub prop_4_1a: ExitScalingParams,
    pub prop_4_1b: HittingParams,
    pub prop_5_1: LevyParams,
    pub prop_6_1: HarmonicMeasureParams,
    pub nash: NashParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    /// Lattice for `export-operator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Claims run when `--claims` is absent.
    #[serde(default)]
    pub claims: Vec<ClaimId>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; absent means all cores. Never affects results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub params: ClaimParams,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// Folds the `mc` block into the per-claim parameters and checks the
    /// path-count floor for the claims that will run.
    pub fn resolved_params(&self, claims: &[ClaimId]) -> Result<ClaimParams, ConfigError> {
        let mut p = self.params.clone();
        let mc = &self.mc;
        if let Some(n) = mc.n_paths {
            p.thm_2_5.n_paths = n;
            p.prop_3_2.n_paths = n;
            p.prop_4_1a.n_paths = n;
            p.prop_4_1b.n_paths = n;
            p.prop_5_1.n_paths = n;
        }
        if let Some(dt) = mc.dt {
            p.thm_2_5.dt = dt;
            p.prop_5_1.dt = dt;
        }
        if let Some(l) = mc.lambda {
            p.thm_2_5.lambda = l;
            p.prop_5_1.lambda = l;
        }
        for c in claims {
            let n = match c {
                ClaimId::Thm2_5 => p.thm_2_5.n_paths,
                ClaimId::Prop3_2 => p.prop_3_2.n_paths,
                ClaimId::Prop4_1a => p.prop_4_1a.n_paths.min(p.prop_4_1a.control_paths),
                ClaimId::Prop4_1b => p.prop_4_1b.n_paths,
                ClaimId::Prop5_1 => p.prop_5_1.n_paths,
                _ => continue,
            };
            if n < MIN_PATHS {
                return Err(ConfigError::Invalid(format!("{c} needs at least {MIN_PATHS} paths, got {n}")));
            }
        }
        Ok(p)
    }

    /// SHA-256 of the canonical JSON of everything that affects results:
    /// worker count and output location are excluded, the seed is the
    /// effective one.
    pub fn digest(&self, seed: u64) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.output_dir = None;
        c.seed = seed;
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        let hash = Sha256::digest(&canonical);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "model": {"dim": 1, "coeff": {"family": "constant", "params": [1.0], "lambda": 1.0}, "kernel": {"family": "zero"}}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert!(c.claims.is_empty());
        assert_eq!(c.params.prop_5_1.n_paths, LevyParams::default().n_paths);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replacen("\"schema_version\"", "\"colour\": 3, \"schema_version\"", 1);
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ConfigError::Parse(_))));
        let bad = MINIMAL.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"params\": {\"nash\": {\"hh\": 1}},", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let bad = MINIMAL.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn path_floor_applies_only_to_requested_claims() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.mc.n_paths = Some(10);
        assert!(c.resolved_params(&[ClaimId::Thm2_7]).is_ok());
        assert!(c.resolved_params(&[ClaimId::Prop5_1]).is_err());
    }

    #[test]
    fn digest_ignores_workers_but_not_seed() {
        let mut a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let d = a.digest(7);
        a.workers = Some(4);
        a.output_dir = Some("elsewhere".into());
        assert_eq!(a.digest(7), d);
        assert_ne!(a.digest(8), d);
        assert_eq!(d.len(), 64);
    }
}
