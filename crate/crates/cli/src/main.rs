//! `fkpp`: travelling-wave speeds and profiles from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fkpp_cli::config::RunConfig;
use fkpp_cli::{run_export_plot, run_solve, run_sweep, run_verify, CliError, Overrides};
use fkpp_core::SuiteOptions;

#[derive(Parser)]
#[command(name = "fkpp", version, about = "Travelling waves of the p-Laplacian Fisher-KPP equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance: summary.json, profile.csv, trajectory.csv
    Solve(Common),
    /// Run the property suite and write report.json
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run only the manufactured matrix
        #[arg(long)]
        quick: bool,
    },
    /// Solve every instance of the configured sweep grid
    Sweep(Common),
    /// Write xi-U and r-y tables for plotting
    ExportPlot(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    tol_c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tol_ode: Option<f64>,
    /// Number of profile samples
    #[arg(long)]
    samples: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            tol_c: self.tol_c,
            tol_ode: self.tol_ode,
            samples: self.samples,
        }
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        let mut cfg = RunConfig::from_file(path)?;
        self.overrides().apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(common) => {
            let summary = run_solve(&common.load()?)?;
            println!("c_star = {}, branch = {}", summary["c_star"], summary["branch"]);
        }
        Command::Sweep(common) => {
            let index = run_sweep(&common.load()?)?;
            println!("{} instances solved", index["total"]);
        }
        Command::ExportPlot(common) => run_export_plot(&common.load()?)?,
        Command::Verify { common, quick } => {
            let defaults = SuiteOptions::default();
            let cfg = if quick { None } else { Some(common.load()?) };
            let opts = SuiteOptions {
                tol_c: common.tol_c.or(cfg.as_ref().map(|c| c.tolerances.tol_c)).unwrap_or(defaults.tol_c),
                tol_ode: common.tol_ode.or(cfg.as_ref().map(|c| c.tolerances.tol_ode)).unwrap_or(defaults.tol_ode),
                samples: common.samples.or(cfg.as_ref().map(|c| c.samples)).unwrap_or(defaults.samples),
                ..defaults
            };
            let out = match (&common.out, &cfg) {
                (Some(out), _) => out.clone(),
                (None, Some(cfg)) => cfg.output_dir.clone(),
                (None, None) => PathBuf::from("out"),
            };
            let report = run_verify(cfg.as_ref(), &out, &opts)?;
            println!("{} checks as expected", report["reports"].as_array().map_or(0, Vec::len));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
