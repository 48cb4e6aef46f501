//! Claim dispatch, report files and exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dirjump::estimators::{self as est, ClaimId, EstimateReport};
use dirjump::model::validate::{validate_model, AssumptionReport};
use dirjump::{Error, Executor, ModelSpec, RngPlan};
use serde::Serialize;

use crate::config::{ClaimParams, ConfigError, ExperimentConfig};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_ESTIMATOR: u8 = 4;
/// Report files could not be written.
pub const EXIT_IO: u8 = 1;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, format!("config: {e}"))
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display()))
}

/// Runs one claim with its own random stream derived from the master seed,
/// so a claim's numbers do not depend on which other claims run with it.
pub fn run_claim(
    claim: ClaimId,
    model: &ModelSpec,
    p: &ClaimParams,
    seed: u64,
    exec: &Executor,
) -> dirjump::Result<EstimateReport> {
    let plan = RngPlan::new(seed).derive(claim.as_str());
    match claim {
        ClaimId::Thm2_4 => est::check_upper_bound(model, &p.thm_2_4),
        ClaimId::Thm2_5 => est::check_lower_bound(model, &p.thm_2_5, &plan, exec),
        ClaimId::Thm2_6 => est::fit_hoelder(model, &p.thm_2_6, &plan, exec),
        ClaimId::Thm2_7 => est::check_harnack(model, &p.thm_2_7, &plan, exec),
        ClaimId::Prop3_2 => est::check_tightness(model, &p.prop_3_2, &plan, exec),
        ClaimId::Prop3_4 => est::check_poincare(model, &p.prop_3_4, &plan),
        ClaimId::Prop4_1a => est::check_exit_scaling(model, &p.prop_4_1a, &plan, exec),
        ClaimId::Prop4_1b => est::check_hitting(model, &p.prop_4_1b, &plan, exec),
        ClaimId::Prop5_1 => est::check_levy_system(model, &p.prop_5_1, &plan, exec),
        ClaimId::Prop6_1 => est::check_harmonic_measure(model, &p.prop_6_1, &plan, exec),
        ClaimId::Nash => est::check_nash(model, &p.nash, &plan),
    }
}

/// JSON document written per claim.
#[derive(Serialize)]
pub struct ReportDocument<'a> {
    #[serde(flatten)]
    pub report: &'a EstimateReport,
    pub config_digest: String,
    pub seed: u64,
}

pub struct RunOptions {
    pub config: PathBuf,
    pub claims: Option<Vec<ClaimId>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub skip_validate: bool,
}

fn failed_assumptions(r: &AssumptionReport) -> Vec<&'static str> {
    let mut v = vec![];
    if !r.pass_ellipticity {
        v.push("ellipticity");
    }
    if !r.pass_moments {
        v.push("moment bounds");
    }
    if !r.pass_symmetry {
        v.push("symmetry");
    }
    if !r.pass_comparability {
        v.push("comparability");
    }
    v
}

fn assumption_report(model: &ModelSpec, seed: u64) -> Result<AssumptionReport, Failure> {
    validate_model(model, seed).map_err(|e| match e {
        Error::InvalidInput(m) => Failure::new(EXIT_CONFIG, format!("model: {m}")),
        e => Failure::new(EXIT_VALIDATION, format!("validator error: {e}")),
    })
}

/// `validate`: the assumption report as JSON on stdout; exit 3 if any
/// assumption fails.
pub fn validate(config: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let report = assumption_report(&cfg.model, seed)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    let failed = failed_assumptions(&report);
    if failed.is_empty() {
        eprintln!("all assumptions pass");
        Ok(())
    } else {
        let mut msg = format!("failed: {}", failed.join(", "));
        if let Some(w) = report.comparability.iter().find_map(|c| c.witness) {
            msg.push_str(&format!("; comparability witness x = {}, y = {}, z = {}", w[0], w[1], w[2]));
        }
        Err(Failure::new(EXIT_VALIDATION, msg))
    }
}

fn key_constants(r: &EstimateReport) -> String {
    r.fitted_constants
        .iter()
        .map(|(k, v)| format!("{k}={v:.4e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `run`: one JSON and one CSV report per claim and a summary table.
pub fn run(opts: &RunOptions) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&opts.config)?;
    let claims = opts.claims.clone().unwrap_or_else(|| cfg.claims.clone());
    if claims.is_empty() {
        return Err(Failure::new(EXIT_CONFIG, "no claims requested (use --claims or the config's claim list)"));
    }
    let params = cfg.resolved_params(&claims)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let out = opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("reports"));

    if !opts.skip_validate {
        let report = assumption_report(&cfg.model, seed)?;
        if !report.pass_core() {
            return Err(Failure::new(
                EXIT_VALIDATION,
                format!("model fails {}; rerun with --skip-validate to override", failed_assumptions(&report).join(", ")),
            ));
        }
        if !report.pass_comparability {
            eprintln!("warning: kernel fails the comparability assumption; comparability-dependent claims may fail");
        }
    }

    let exec = Executor::parallel(opts.workers.or(cfg.workers));
    let digest = cfg.digest(seed);
    std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
    let mut reports = vec![];
    for &claim in &claims {
        let report = run_claim(claim, &cfg.model, &params, seed, &exec).map_err(|e| match e {
            Error::InvalidInput(m) => Failure::new(EXIT_CONFIG, format!("{claim}: {m}")),
            e => Failure::new(EXIT_ESTIMATOR, format!("{claim}: {e}")),
        })?;
        let doc = ReportDocument { report: &report, config_digest: digest.clone(), seed };
        let json = out.join(format!("{claim}.json"));
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        std::fs::write(&json, text).map_err(|e| io_failure(&json, e))?;
        let csv = out.join(format!("{claim}.csv"));
        std::fs::write(&csv, report.diagnostics.to_csv()).map_err(|e| io_failure(&csv, e))?;
        reports.push(report);
    }

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "{:<10} {:<5} fitted constants", "claim", "pass");
    for r in &reports {
        let _ = writeln!(w, "{:<10} {:<5} {}", r.claim_id.as_str(), if r.pass { "PASS" } else { "FAIL" }, key_constants(r));
        for n in &r.notes {
            let _ = writeln!(w, "{:<16} note: {n}", "");
        }
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.claim_id.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_ESTIMATOR, format!("claims failed: {}", failed.join(", "))))
    }
}

/// `export-operator`: the lattice generator of the config's grid.
pub fn export_operator(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let grid = cfg.grid.as_ref().ok_or_else(|| Failure::new(EXIT_CONFIG, "config has no grid block"))?;
    let gen = dirjump::grid::assemble(&cfg.model, grid).map_err(|e| Failure::new(EXIT_CONFIG, format!("grid: {e}")))?;
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| io_failure(p, e))?;
            dirjump::grid::write_operator(&gen, std::io::BufWriter::new(f)).map_err(|e| io_failure(p, e))
        }
        None => dirjump::grid::write_operator(&gen, std::io::stdout().lock()).map_err(|e| io_failure(Path::new("stdout"), e)),
    }
}

pub fn list_claims() {
    for c in ClaimId::ALL {
        println!("{:<10} {}", c.as_str(), c.summary());
    }
}
