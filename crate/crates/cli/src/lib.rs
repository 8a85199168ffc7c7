//! Command-line front end: configuration files, batch simulation, fits and
//! CSV/JSON output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ringfringe", version, about = "Heralded four-fold fringes from twin ring sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Four-fold fringe against MZI phase, both photon labellings.
    Fringe(FringeArgs),
    /// Fringe visibility against source brightness.
    VisibilitySweep(SweepArgs),
    /// Schmidt decomposition of the joint spectral amplitude.
    Jsa(JsaArgs),
    /// Fit measured data.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Heater schedule holding the rings on resonance while the MZI is tuned.
    Compensate(CompensateArgs),
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Source brightness from a pump-power scan.
    Brightness(FitBrightnessArgs),
    /// C_max and phase offset from four-fold counts.
    Fringe(FitFringeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Experiment file; the built-in device description when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override the pair-number truncation.
    #[arg(long, value_name = "N")]
    pub trunc: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FringeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Override the number of phase samples.
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Override the number of brightness points.
    #[arg(long, value_name = "N")]
    pub grid: Option<usize>,
    #[arg(long)]
    pub nbar_min: Option<f64>,
    #[arg(long)]
    pub nbar_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct JsaArgs {
    /// JSON report; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Points per frequency axis.
    #[arg(long, value_name = "N", default_value_t = 512)]
    pub grid: usize,
    /// Half-width of each axis in linewidths.
    #[arg(long, default_value_t = 20.0)]
    pub half_span: f64,
    #[arg(long, default_value_t = ringfringe::device::PUMP_FWHM_PM)]
    pub pump_fwhm_pm: f64,
    /// Channel filter width; 0 disables filtering.
    #[arg(long, default_value_t = ringfringe::device::DWDM_WIDTH_GHZ)]
    pub filter_ghz: f64,
    /// Square amplitude matrix (headerless CSV) to decompose instead of the ring model.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Write |JSA| as a headerless square CSV.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitBrightnessArgs {
    /// Power-scan CSV: p_in_mw,c_s,c_i,cc,tau_s[,integration_s].
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Acquisition time assumed when the CSV has no integration_s column.
    #[arg(long, default_value_t = 1.0)]
    pub integration_s: f64,
    /// Fix the channel efficiencies instead of fitting them.
    #[arg(long, requires = "eta_i")]
    pub eta_s: Option<f64>,
    #[arg(long, requires = "eta_s")]
    pub eta_i: Option<f64>,
    #[arg(long, default_value_t = ringfringe::device::REP_RATE_HZ)]
    pub rep_rate_hz: f64,
    /// Pump power at which the brightness is reported.
    #[arg(long, default_value_t = 1.0)]
    pub power_mw: f64,
}

#[derive(Debug, Args)]
pub struct FitFringeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fringe CSV: phi_rad,counts,integration_s.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for restarts and bootstrap.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 400)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct CompensateArgs {
    /// Crosstalk file with [schedule] and [[ring]] tables.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
