//! Configuration-driven experiment runner for the `qfluct` kernels.
//!
//! Each subcommand reads a JSON config, writes CSV (and a few binary)
//! artifacts plus `manifest.json` into a run directory, and evaluates the
//! checks configured for it.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use manifest::{Check, Manifest};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<qfluct::Error> for CliError {
    fn from(e: qfluct::Error) -> Self {
        use qfluct::Error as E;
        match e {
            E::Config(_) | E::Precondition(_) => CliError::Config(e.to_string()),
            E::Numerical { .. } | E::Format(_) => CliError::Numerical(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Neumann scattering problem over an N sweep.
    ScatteringStudy,
    /// Modified Hartree evolution with conservation diagnostics.
    HartreeRun,
    /// Pair kernel k_{N,t} norms and ch/sh identities over an N sweep.
    KernelStudy,
    /// Fluctuation generator against its N → ∞ limit.
    GeneratorStudy,
    /// Bogoliubov flow of the fluctuation generator.
    FlowRun,
    /// Exact few-body oracle against the quadratic dynamics.
    OracleCompare,
    /// oracle-compare over an N list with a merged trend table.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ScatteringStudy => "scattering-study",
            Command::HartreeRun => "hartree-run",
            Command::KernelStudy => "kernel-study",
            Command::GeneratorStudy => "generator-study",
            Command::FlowRun => "flow-run",
            Command::OracleCompare => "oracle-compare",
            Command::Sweep => "sweep",
        }
    }

    /// Checks this command can evaluate, with the config key enabling each.
    pub fn checks(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::ScatteringStudy => &[
                ("lambda_error_final", "checks.lambda_error_max: |normalized lambda - 1| at the largest N"),
                ("lambda_error_monotone", "checks.lambda_error_max: the error decreases along the sweep"),
                ("omega_bound_spread", "checks.bound_spread_max: max/min of sup N w (r + N^-b)"),
                ("gradient_bound_spread", "checks.bound_spread_max: max/min of sup N |w'| (r + N^-b)^2"),
                ("limit_error_decreasing", "checks.limit_error_decreasing: strict decrease of sup |N w - w_inf|"),
            ],
            Command::HartreeRun => &[
                ("mass_drift", "checks.mass_drift_max"),
                ("energy_drift", "checks.energy_drift_max"),
                ("order_slope", "checks.order_slope: self-convergence slope over checks.order_dts"),
            ],
            Command::KernelStudy => &[
                ("k_hs_spread", "checks.hs_spread_max: max/min of ||k||_HS"),
                ("grad_k_exponent", "checks.grad_exponent: fitted exponent of ||grad k||_HS in N"),
                ("identity_defect", "checks.identity_defect_max: ch ch* - sh sh* = 1, ch sh^T = sh ch^T"),
            ],
            Command::GeneratorStudy => &[
                ("hermiticity_residual", "checks.hermiticity_max"),
                ("eta_imaginary_part", "checks.eta_imag_max"),
                ("block_distance_decreasing", "checks.block_distance_decreasing"),
            ],
            Command::FlowRun => &[("symplectic_defect", "checks.symplectic_defect_max")],
            Command::OracleCompare => &[
                ("norm_defect", "checks.norm_defect_max"),
                ("phase_beats_ablation", "checks.phase_beats_ablation"),
            ],
            Command::Sweep => &[
                ("gap_monotone", "checks.gap_monotone: final gap non-increasing in N up to one inversion"),
                ("phase_beats_ablation", "checks.phase_beats_ablation: in every run"),
                ("n_a_spread", "checks.hypothesis_spread_max: max/min of N a_N"),
                ("n_b_spread", "checks.hypothesis_spread_max: max/min of N b_N"),
                ("round_trip", "checks.round_trip_max: relative <xi,(K+N)xi> mismatch"),
            ],
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qfluct", version, about = "Quantum fluctuation studies for dilute Bose gases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config, or a manifest.json from an earlier run to replay.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory for run directories (default: $CF_OUT_DIR or ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (overrides the config).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Validate the config and exit.
    #[arg(long, global = true)]
    pub check: bool,
    /// List the checks of the subcommand and exit.
    #[arg(long, global = true)]
    pub list_checks: bool,
}

/// What a finished invocation reports.
#[derive(Debug)]
pub enum Outcome {
    Listed,
    Valid,
    Ran { dir: PathBuf, manifest: Manifest },
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Ran { manifest, .. } if manifest.checks.iter().any(|c| !c.pass) => 1,
            _ => 0,
        }
    }
}

fn out_root(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("CF_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if cli.list_checks {
        for (name, key) in cli.command.checks() {
            println!("{name:28} {key}");
        }
        return Ok(Outcome::Listed);
    }
    let name = cli.command.name();
    let resolved = commands::resolve(cli.command, cli.config.as_deref(), cli.workers)?;
    if cli.check {
        return Ok(Outcome::Valid);
    }
    let value = resolved.to_value()?;
    let id = manifest::run_id(name, &value);
    let dir = out_root(cli).join(format!("{name}-{}", &id[..16]));
    let mut rd = manifest::RunDir::create(dir.clone())?;
    let checks = resolved.execute(&mut rd)?;
    let manifest = rd.finish(name, value, checks)?;
    Ok(Outcome::Ran { dir, manifest })
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            if let Outcome::Ran { dir, manifest } = &out {
                for c in &manifest.checks {
                    println!("{} {} = {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
                }
                println!("run directory: {}", dir.display());
            } else if matches!(out, Outcome::Valid) {
                println!("config ok");
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("qfluct {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
