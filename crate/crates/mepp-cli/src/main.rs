//! Command-line front end: parameter sweeps, yield curves, the verification
//! suite, threshold surfaces, and single-circuit state dumps.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 I/O error,
//! 3 verification failure.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod numfmt;
mod stateparse;

use config::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mepp",
    about = "Entanglement purification calculator and simulator for GHZ-state spin ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the grid-driven commands. Values resolve as
/// defaults < config file < explicit flag.
#[derive(Args, Debug, Clone, Default)]
struct CommonOpts {
    /// Key=value config file supplying any of the long options.
    #[arg(long)]
    config: Option<String>,
    /// Lower end of the f0 grid.
    #[arg(long = "f0-min")]
    f0_min: Option<f64>,
    /// Upper end of the f0 grid.
    #[arg(long = "f0-max")]
    f0_max: Option<f64>,
    /// Grid step.
    #[arg(long)]
    step: Option<f64>,
    /// Fidelity threshold for the yield policy.
    #[arg(long = "f-thr")]
    f_thr: Option<f64>,
    /// Monte Carlo trials per scenario.
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed; falls back to the MEPP_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

/// Fully resolved options.
pub struct Resolved {
    pub f0_min: f64,
    pub f0_max: f64,
    pub step: f64,
    pub f_thr: f64,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<String>,
    pub circuit: Option<String>,
    pub state: Option<String>,
}

impl CommonOpts {
    fn resolve(&self) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::empty(),
        };
        let env_seed = match std::env::var("MEPP_SEED") {
            Ok(raw) => Some(raw.parse::<u64>().map_err(|_| {
                CliError::Usage(format!("MEPP_SEED must be a 64-bit integer, got `{raw}`"))
            })?),
            Err(_) => None,
        };
        let resolved = Resolved {
            f0_min: self.f0_min.or(file.get_f64("f0_min")?).unwrap_or(0.25),
            f0_max: self.f0_max.or(file.get_f64("f0_max")?).unwrap_or(1.0),
            step: self.step.or(file.get_f64("step")?).unwrap_or(0.01),
            f_thr: self.f_thr.or(file.get_f64("f_thr")?).unwrap_or(0.95),
            trials: self.trials.or(file.get_u64("trials")?).unwrap_or(100_000),
            seed: self
                .seed
                .or(file.get_u64("seed")?)
                .or(env_seed)
                .unwrap_or(0),
            out: self.out.clone().or_else(|| file.get("out")),
            circuit: file.get("circuit"),
            state: file.get("state"),
        };
        if !(0.0..=1.0).contains(&resolved.f0_min)
            || !(0.0..=1.0).contains(&resolved.f0_max)
            || resolved.f0_min > resolved.f0_max
        {
            return Err(CliError::Usage(format!(
                "invalid f0 range [{}, {}]",
                resolved.f0_min, resolved.f0_max
            )));
        }
        if resolved.step <= 0.0 {
            return Err(CliError::Usage(format!(
                "step must be positive, got {}",
                resolved.step
            )));
        }
        if !(0.0 < resolved.f_thr && resolved.f_thr < 1.0) {
            return Err(CliError::Usage(format!(
                "f_thr must lie in (0, 1), got {}",
                resolved.f_thr
            )));
        }
        Ok(resolved)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit the symmetric-noise efficiency and fidelity curves as CSV.
    Sweep(CommonOpts),
    /// Emit the normal-vs-recycling yield comparison as CSV.
    Yield(CommonOpts),
    /// Run the oracle-equivalence and Monte Carlo verification matrix.
    Verify {
        #[command(flatten)]
        common: CommonOpts,
        /// Shift every Monte Carlo prediction by this amount (fault
        ///-injection hook for exercising the failure path).
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Run one named circuit on a configured input and dump the branches.
    Simulate(CommonOpts),
    /// Emit the purification gain-threshold surface as CSV.
    Thresholds(CommonOpts),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(common) => commands::sweep(&common.resolve()?),
        Command::Yield(common) => commands::yield_curve(&common.resolve()?),
        Command::Verify { common, perturb } => commands::verify(&common.resolve()?, perturb),
        Command::Simulate(common) => commands::simulate(&common.resolve()?),
        Command::Thresholds(common) => commands::thresholds(&common.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
