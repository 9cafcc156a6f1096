//! Command implementations behind the `fkpp` binary: single solves, sweeps,
//! property verification and plot-data export.
//!
//! Every data file is a pure function of the configuration and tolerances:
//! JSON objects have sorted keys, sweep instances are written to their own
//! directories and the sweep index is written once at the end.

pub mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use fkpp_core::harness::{matrix_checks, SuiteOptions};
use fkpp_core::problem::DEFAULT_FIT_WINDOW;
use fkpp_core::speed::{solve_cstar_with, SCHEMA_VERSION};
use fkpp_core::wave::{reconstruct_with, ReconstructOptions};
use fkpp_core::{
    estimate_exponents, run_suite, CStarResult, Diffusion, Error, ProblemSpec, PropertyReport,
    SolveOptions, SuiteReport, WaveProfile,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },
    #[error("{failed} of {total} sweep instances failed")]
    SweepFailed { failed: usize, total: usize, code: i32 },
    #[error("{0} property checks did not behave as expected")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Solver(e) => solver_exit_code(e),
            CliError::SweepFailed { code, .. } => *code,
            CliError::ChecksFailed(_) => EXIT_CHECKS_FAILED,
        }
    }
}

fn solver_exit_code(e: &Error) -> i32 {
    match e {
        Error::SignStructureViolation(_)
        | Error::HypothesisGFails { .. }
        | Error::NegativeG1(_)
        | Error::NonPositiveDiffusion { .. } => EXIT_HYPOTHESIS,
        Error::InvalidParameter(_) | Error::Table(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NONCONVERGENCE,
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol_c: Option<f64>,
    pub tol_ode: Option<f64>,
    pub samples: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.tol_c {
            cfg.tolerances.tol_c = t;
        }
        if let Some(t) = self.tol_ode {
            cfg.tolerances.tol_ode = t;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        cfg.validate()
    }
}

/// JSON number, with infinities and NaN spelled out as strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("+inf")
    } else {
        json!("-inf")
    }
}

/// Problem specification for a configuration, plus warnings raised while
/// attaching endpoint exponents.
pub fn build_spec(cfg: &RunConfig) -> Result<(ProblemSpec, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let family = cfg.problem.family()?;
    let mut spec = ProblemSpec::from_family(family, cfg.p, cfg.diffusion)?
        .with_quad_tolerance(cfg.tolerances.tol_quad);
    if let Some(e) = cfg.exponents {
        spec = spec.with_exponents(e);
    } else if spec.exponents().is_none() {
        match estimate_exponents(&spec, DEFAULT_FIT_WINDOW) {
            Ok(e) => spec = spec.with_exponents(e),
            Err(Error::PoorFit(why)) => warnings.push(format!("PoorFit: {why}; envelope checks skipped")),
            Err(e) => warnings.push(format!("exponents unavailable: {e}")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((spec, warnings))
}

fn solve(cfg: &RunConfig, spec: &ProblemSpec) -> Result<(CStarResult, WaveProfile), CliError> {
    let t = &cfg.tolerances;
    let result = solve_cstar_with(spec, &SolveOptions::new(t.tol_c, t.tol_ode))?;
    let profile = reconstruct_with(
        spec,
        &result,
        &ReconstructOptions {
            x0: cfg.anchor_x0,
            samples: cfg.samples,
            ..Default::default()
        },
    )?;
    Ok((result, profile))
}

fn instance_json(cfg: &RunConfig) -> Value {
    let mut v = cfg.problem.to_json();
    v["p"] = json!(cfg.p);
    v["diffusion"] = match cfg.diffusion {
        Diffusion::Constant { d0 } => json!({ "d0": d0, "d2": 0.0 }),
        Diffusion::Quadratic { d0, d2 } => json!({ "d0": d0, "d2": d2 }),
    };
    v
}

fn summary_json(cfg: &RunConfig, spec: &ProblemSpec, result: &CStarResult, profile: &WaveProfile, warnings: &[String]) -> Value {
    let t = &cfg.tolerances;
    json!({
        "schema_version": SCHEMA_VERSION,
        "instance": instance_json(cfg),
        "tolerances": { "tol_c": t.tol_c, "tol_ode": t.tol_ode, "tol_quad": t.tol_quad },
        "c_star": num(result.c_star),
        "branch": result.branch,
        "terminal_residual": num(result.terminal_residual),
        "iterations": result.iterations,
        "a_priori_cap": result.a_priori_cap.map(num),
        "g1": num(result.g1),
        "interfaces": profile.sidecar(),
        "exponents": spec.exponents(),
        "samples": cfg.samples,
        "warnings": warnings,
    })
}

fn output_error(path: &Path, e: impl ToString) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| output_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_error(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(BufWriter<fs::File>) -> fkpp_core::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| output_error(path, e))?;
    f(BufWriter::new(file)).map_err(|e| output_error(path, e))
}

/// Solves one instance and writes `summary.json`, `profile.csv`,
/// `profile.json` and `trajectory.csv` into `dir`. Returns the summary.
pub fn solve_into(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let (spec, warnings) = build_spec(cfg)?;
    let (result, profile) = solve(cfg, &spec)?;
    create_dir(dir)?;
    let summary = summary_json(cfg, &spec, &result, &profile, &warnings);
    write_json(&dir.join("summary.json"), &summary)?;
    write_with(&dir.join("profile.csv"), |w| profile.write_csv(w))?;
    write_json(&dir.join("profile.json"), &profile.sidecar())?;
    write_with(&dir.join("trajectory.csv"), |w| result.profile.write_csv(w))?;
    Ok(summary)
}

pub fn run_solve(cfg: &RunConfig) -> Result<Value, CliError> {
    let summary = solve_into(cfg, &cfg.output_dir)?;
    log::info!("c* = {} ({})", summary["c_star"], summary["branch"]);
    Ok(summary)
}

/// Solves every instance of the sweep grid concurrently. Each instance gets
/// its own directory and `log.txt`; failures are recorded in `index.json`
/// and do not stop the other instances.
pub fn run_sweep(cfg: &RunConfig) -> Result<Value, CliError> {
    let instances = cfg.instances();
    create_dir(&cfg.output_dir)?;
    let entries: Vec<(Value, Option<i32>)> = instances
        .par_iter()
        .map(|(name, inst)| {
            let dir = cfg.output_dir.join(name);
            let outcome = solve_into(inst, &dir);
            let (entry, code, log_line) = match &outcome {
                Ok(s) => (
                    json!({ "name": name, "status": "ok", "c_star": s["c_star"], "branch": s["branch"] }),
                    None,
                    format!("ok: c* = {}", s["c_star"]),
                ),
                Err(e) => (
                    json!({ "name": name, "status": "failed", "exit_code": e.exit_code(), "error": e.to_string() }),
                    Some(e.exit_code()),
                    format!("failed: {e}"),
                ),
            };
            let _ = fs::create_dir_all(&dir);
            let mut log_text = String::new();
            if let Ok(s) = &outcome {
                for w in s["warnings"].as_array().into_iter().flatten() {
                    log_text.push_str(&format!("warning: {}\n", w.as_str().unwrap_or_default()));
                }
            }
            log_text.push_str(&log_line);
            log_text.push('\n');
            let _ = fs::write(dir.join("log.txt"), log_text);
            (entry, code)
        })
        .collect();
    let failed: Vec<i32> = entries.iter().filter_map(|(_, c)| *c).collect();
    let index = json!({
        "schema_version": SCHEMA_VERSION,
        "instances": entries.iter().map(|(e, _)| e.clone()).collect::<Vec<_>>(),
        "failed": failed.len(),
        "total": entries.len(),
    });
    write_json(&cfg.output_dir.join("index.json"), &index)?;
    match failed.iter().max() {
        None => Ok(index),
        Some(&code) => Err(CliError::SweepFailed {
            failed: failed.len(),
            total: entries.len(),
            code,
        }),
    }
}

fn report_json(r: &PropertyReport) -> Value {
    json!({
        "check_name": r.check_name,
        "passed": r.passed,
        "margin": num(r.margin),
        "negative_control": r.negative_control,
        "context": r.context,
    })
}

/// Verification report as written to `report.json`.
pub fn suite_json(suite: &SuiteReport, warnings: &[String]) -> Value {
    json!({
        "schema_version": suite.schema_version,
        "passed": suite.passed,
        "warnings": warnings,
        "reports": suite.reports.iter().map(report_json).collect::<Vec<_>>(),
    })
}

/// Runs the property suite on the configured instance and the manufactured
/// matrix, or on the matrix alone when `cfg` is `None`, and writes
/// `report.json` into `out`.
pub fn run_verify(cfg: Option<&RunConfig>, out: &Path, opts: &SuiteOptions) -> Result<Value, CliError> {
    let (suite, warnings) = match cfg {
        Some(cfg) => {
            let (spec, warnings) = build_spec(cfg)?;
            let name = cfg.problem.name().to_string();
            (run_suite(&[(name, spec)], true, opts), warnings)
        }
        None => (SuiteReport::from_reports(matrix_checks(opts)), Vec::new()),
    };
    create_dir(out)?;
    let report = suite_json(&suite, &warnings);
    write_json(&out.join("report.json"), &report)?;
    let bad = suite.failures().count();
    log::info!("{} checks, {} unexpected", suite.reports.len(), bad);
    if bad > 0 {
        for r in suite.failures() {
            log::error!("unexpected outcome: {}", r.check_name);
        }
        return Err(CliError::ChecksFailed(bad));
    }
    Ok(report)
}

/// Writes plot-ready tables: `xi_u.csv` with `xi,u,du` and `r_y.csv` with
/// `r,y,pG` (the profile and its envelope `p' G`) on a uniform `r` grid.
pub fn run_export_plot(cfg: &RunConfig) -> Result<(), CliError> {
    let (spec, _) = build_spec(cfg)?;
    let (result, profile) = solve(cfg, &spec)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_with(&dir.join("xi_u.csv"), |w| profile.write_csv(w))?;
    let n = cfg.samples.max(2);
    let end = result.profile.end();
    let grid: Vec<f64> = (0..n)
        .map(|k| -1.0 + (end + 1.0) * k as f64 / (n - 1) as f64)
        .collect();
    let pot = spec.potential_on_grid(&grid)?;
    let pc = spec.p_conj();
    let path = dir.join("r_y.csv");
    let mut text = String::from("r,y,pG\n");
    for (&r, &g) in grid.iter().zip(&pot) {
        text.push_str(&format!("{r:.16e},{:.16e},{:.16e}\n", result.profile.eval(r), pc * g));
    }
    fs::write(&path, text).map_err(|e| output_error(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        let hyp = CliError::Solver(Error::SignStructureViolation("two zeros".into()));
        assert_eq!(hyp.exit_code(), EXIT_HYPOTHESIS);
        assert_eq!(CliError::Solver(Error::HypothesisGFails { at: 1.0, value: -0.1 }).exit_code(), EXIT_HYPOTHESIS);
        assert_eq!(CliError::Solver(Error::StepSizeCollapse { at: 0.5, h: 1e-20 }).exit_code(), EXIT_NONCONVERGENCE);
        assert_eq!(CliError::Solver(Error::NonConvergent("x".into())).exit_code(), EXIT_NONCONVERGENCE);
        assert_eq!(CliError::Solver(Error::InvalidParameter("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::ChecksFailed(1).exit_code(), EXIT_CHECKS_FAILED);
    }

    #[test]
    fn infinities_become_strings() {
        assert_eq!(num(f64::INFINITY), json!("+inf"));
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
        assert_eq!(num(0.5), json!(0.5));
    }
}
