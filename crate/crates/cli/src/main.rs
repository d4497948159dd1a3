//! `timescales`: one executable per engine family, JSON config in, CSV/JSON
//! artifacts plus a digest manifest out.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd_cycles;
mod cmd_exo;
mod cmd_ghg;
mod cmd_glass;
mod cmd_tipping;
mod config;
mod emit;

use emit::Format;

#[derive(Parser)]
#[command(name = "timescales", version, about = "Simulation engines for multi-time-scale models")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// JSON configuration document (strict schema, schema_version 1).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Series output format; JSON wraps each series as times/values arrays.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Suppress progress reporting on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bistable climate variable under a drifting control parameter.
    #[command(subcommand)]
    Tipping(TippingCmd),
    /// 2D binary inverse-power-law liquid.
    #[command(subcommand)]
    Glass(GlassCmd),
    /// Insulin vesicle pool kinetics.
    #[command(subcommand)]
    Exo(ExoCmd),
    /// Second-order multiplier-accelerator income dynamics.
    #[command(subcommand)]
    Cycles(CyclesCmd),
    /// Greenhouse compartment models with release feedback.
    #[command(subcommand)]
    Ghg(GhgCmd),
}

#[derive(Subcommand)]
enum TippingCmd {
    /// One noisy trajectory under the configured ramp.
    Run,
    /// Forward/return transition fractions over an ensemble of seeds.
    Hysteresis,
    /// Fold point of the tilted potential.
    CriticalAlpha,
}

#[derive(Subcommand)]
enum GlassCmd {
    /// Advance a configuration and record energy diagnostics.
    Run,
    /// Mean squared displacement of a sampled trajectory.
    Msd,
    /// Reduced-unit MSD overlap of two density/temperature pairs.
    ScalingCheck,
}

#[derive(Subcommand)]
enum ExoCmd {
    /// Integrate the pool model under the configured calcium protocol.
    Run,
    /// Steady state at basal calcium.
    Resting,
    /// First-phase peak, nadir, and plateau of the secretion curve.
    Metrics,
}

#[derive(Subcommand)]
enum CyclesCmd {
    /// Iterate the income recurrence.
    Run,
    /// Characteristic roots and regime.
    Classify {
        /// Marginal propensity to consume.
        #[arg(long)]
        c: Option<f64>,
        /// Accelerator coefficient.
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Analytic solution on the same grid as `run`.
    ClosedForm,
    /// Trend/cycle/residual split of a series from CSV.
    Decompose,
}

#[derive(Subcommand)]
enum GhgCmd {
    /// Warming potential relative to the reference gas.
    Gwp {
        /// Gas half-life in years (shorthand for an exponential profile).
        #[arg(long)]
        half_life: Option<f64>,
        /// Integration horizon in years.
        #[arg(long)]
        horizon: Option<f64>,
        /// Instantaneous radiative-efficiency ratio.
        #[arg(long)]
        a_ratio: Option<f64>,
    },
    /// Eigenvalues and stability of the configured model.
    Stability,
    /// Smallest destabilizing release gain.
    CriticalGain,
    /// Integrate the compartment model and classify the outcome.
    Simulate,
}

/// Anything that can abort a run, mapped to (exit code, error_code tag).
#[derive(Debug)]
pub enum CliError {
    ConfigNotFound(PathBuf),
    ConfigInvalid(String),
    Engine(timescales_core::Error),
    OutputIo(std::io::Error),
}

impl CliError {
    fn exit_parts(&self) -> (u8, &'static str) {
        match self {
            CliError::ConfigNotFound(_) => (2, "config_not_found"),
            CliError::ConfigInvalid(_) => (2, "config_invalid"),
            CliError::Engine(timescales_core::Error::Validation(_)) => (2, "validation"),
            CliError::Engine(timescales_core::Error::Io(_)) => (2, "input_io"),
            CliError::Engine(_) => (3, "numerical"),
            CliError::OutputIo(_) => (1, "io"),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::ConfigNotFound(p) => write!(f, "config file not found: {}", p.display()),
            CliError::ConfigInvalid(m) => write!(f, "invalid config: {m}"),
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::OutputIo(e) => write!(f, "output: {e}"),
        }
    }
}

impl From<timescales_core::Error> for CliError {
    fn from(e: timescales_core::Error) -> Self {
        CliError::Engine(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::OutputIo(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("error_code=usage");
            return ExitCode::from(1);
        }
    };

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, tag) = err.exit_parts();
            eprintln!("{err}");
            eprintln!("error_code={tag}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Tipping(TippingCmd::Run) => cmd_tipping::run(cli),
        Cmd::Tipping(TippingCmd::Hysteresis) => cmd_tipping::hysteresis(cli),
        Cmd::Tipping(TippingCmd::CriticalAlpha) => cmd_tipping::critical_alpha(cli),
        Cmd::Glass(GlassCmd::Run) => cmd_glass::run(cli),
        Cmd::Glass(GlassCmd::Msd) => cmd_glass::msd(cli),
        Cmd::Glass(GlassCmd::ScalingCheck) => cmd_glass::scaling_check(cli),
        Cmd::Exo(ExoCmd::Run) => cmd_exo::run(cli),
        Cmd::Exo(ExoCmd::Resting) => cmd_exo::resting(cli),
        Cmd::Exo(ExoCmd::Metrics) => cmd_exo::metrics(cli),
        Cmd::Cycles(CyclesCmd::Run) => cmd_cycles::run(cli),
        Cmd::Cycles(CyclesCmd::Classify { c, nu }) => cmd_cycles::classify(cli, *c, *nu),
        Cmd::Cycles(CyclesCmd::ClosedForm) => cmd_cycles::closed_form(cli),
        Cmd::Cycles(CyclesCmd::Decompose) => cmd_cycles::decompose(cli),
        Cmd::Ghg(GhgCmd::Gwp { half_life, horizon, a_ratio }) => {
            cmd_ghg::gwp(cli, *half_life, *horizon, *a_ratio)
        }
        Cmd::Ghg(GhgCmd::Stability) => cmd_ghg::stability(cli),
        Cmd::Ghg(GhgCmd::CriticalGain) => cmd_ghg::critical_gain(cli),
        Cmd::Ghg(GhgCmd::Simulate) => cmd_ghg::simulate(cli),
    }
}

impl Cli {
    pub fn emitter(&self) -> Result<emit::Emitter, CliError> {
        Ok(emit::Emitter::create(&self.out, self.format)?)
    }

    pub fn config_path(&self) -> Option<&std::path::Path> {
        self.config.as_deref()
    }

    pub fn seed_override(&self) -> Option<u64> {
        self.seed
    }

    pub fn quiet(&self) -> bool {
        self.quiet
    }
}

/// Resolved-config JSON for the manifest.
pub fn to_value<T: serde::Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}
