//! `oqs`: command-line front end for the open-quantum-system library.
//!
//! Every subcommand writes CSV tables and a JSON summary into `--out-dir`
//! and echoes the summary on stdout. Exit code 2 marks invalid input, 3 a
//! numerical failure; either way a JSON error object goes to stderr.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use oqs::OqsError;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError { code: 2, kind: "validation", message: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError { code: 3, kind: "numerical", message: msg.into() }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
        CliError { code: 2, kind: "io", message: format!("{}: {e}", path.display()) }
    }
}

impl From<OqsError> for CliError {
    fn from(e: OqsError) -> Self {
        if e.is_validation() {
            CliError::validation(e.to_string())
        } else {
            CliError::numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oqs", version, about = "Discrete eigenstates and survival dynamics of 1D open quantum systems")]
struct Cli {
    /// JSON object of parameters; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named parameter set (table1, fig16, figB1, fig3, fig4, fig5, fig6, fig11, fig20).
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Also write a plotting script for the main table.
    #[arg(long, global = true, value_parser = ["gnuplot"])]
    plot: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transmission coefficient of the triple-delta potential with a pole overlay.
    Transmission(TransmissionArgs),
    /// Continuum poles in a box of the K plane and the seeding density.
    Poles(PolesArgs),
    /// Dimer poles as the on-site potential varies.
    Sweep(SweepArgs),
    /// Exceptional point where the even resonant pair collides.
    Ep(EpArgs),
    /// All eigenpairs of the quadratic eigenvalue problem of a lattice.
    Qep(LatticeArgs),
    /// Survival amplitude rebuilt from the discrete states.
    Survival(SurvivalArgs),
    /// Survival under repeated measurement.
    Zeno(ZenoArgs),
    /// Convergence of a discretized pole to its continuum value.
    ContinuumLimit(ContinuumLimitArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_min: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolesArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_max: Option<f64>,
    /// Seed grid cells along xi.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_xi: Option<usize>,
    /// Seed grid cells along eta.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_eta: Option<usize>,
    /// Density-plot samples along xi (0 disables the density table).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_xi: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_eta: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Newton seed used when the trajectory does not reach a collision.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_alpha0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_eta: Option<f64>,
}

/// A lattice from a JSON file, or the dimer given by `v0` and `w1`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LatticeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SurvivalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub lattice: LatticeArgs,
    /// Real initial state, one component per site (normalized internally).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[arg(long, value_parser = ["k-integral", "bessel"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<String>,
    /// Append the truncated-chain propagation column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    /// Lead sites kept by the oracle (default: just outside the light cone).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_sites: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoArgs {
    /// Decay rate gamma.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Total time T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumLimitArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    /// Grid spacings, each dividing the half-width.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacings: Option<Vec<f64>>,
    /// Approximate continuum pole to follow (default: leading resonance).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_im: Option<f64>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OQS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("OQS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::numerical(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let start = Instant::now();
    let preset = cli.preset.as_deref();
    let cfg = cli.config.as_deref();
    let (name, inputs, run) = match &cli.command {
        Command::Transmission(a) => {
            let (p, v) = config::resolve("transmission", a, preset, cfg)?;
            ("transmission", v, commands::transmission(&p)?)
        }
        Command::Poles(a) => {
            let (p, v) = config::resolve("poles", a, preset, cfg)?;
            ("poles", v, commands::poles(&p)?)
        }
        Command::Sweep(a) => {
            let (p, v) = config::resolve("sweep", a, preset, cfg)?;
            ("sweep", v, commands::sweep(&p)?)
        }
        Command::Ep(a) => {
            let (p, v) = config::resolve("ep", a, preset, cfg)?;
            ("ep", v, commands::ep(&p)?)
        }
        Command::Qep(a) => {
            let (p, v) = config::resolve("qep", a, preset, cfg)?;
            ("qep", v, commands::qep(&p)?)
        }
        Command::Survival(a) => {
            let (p, v) = config::resolve("survival", a, preset, cfg)?;
            ("survival", v, commands::survival(&p)?)
        }
        Command::Zeno(a) => {
            let (p, v) = config::resolve("zeno", a, preset, cfg)?;
            ("zeno", v, commands::zeno(&p)?)
        }
        Command::ContinuumLimit(a) => {
            let (p, v) = config::resolve("continuum-limit", a, preset, cfg)?;
            ("continuum-limit", v, commands::continuum_limit(&p)?)
        }
    };
    let mut summary = output::Summary {
        command: name.to_string(),
        inputs,
        outputs: run.outputs,
        residuals: run.residuals,
        tolerances: run.tolerances,
        wall_time: start.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    output::emit(&cli.out_dir, &run.tables, &mut summary, cli.plot.as_deref())
}

fn fail(e: &CliError) -> ExitCode {
    let body = json!({"error": {"kind": e.kind, "message": e.message, "exit_code": e.code}});
    eprintln!("{body}");
    ExitCode::from(e.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::validation(e.to_string().trim_end())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
