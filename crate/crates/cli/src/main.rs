use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod report;

/// Inlet-temperature analytics: change detection, power-sensitivity
/// analysis, simulation and setpoint optimization.
#[derive(Debug, Parser)]
#[command(name = "inlet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect setpoint changes in every room under a directory.
    Detect(DetectArgs),
    /// Detect changes and analyse power around each one.
    Analyze(AnalyzeArgs),
    /// Generate synthetic telemetry from a scenario.
    Simulate(SimulateArgs),
    /// Find the inlet temperature with the lowest building power.
    Optimize(OptimizeArgs),
    /// Print a text summary of an analysis results file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DetectorArgs {
    /// Rolling window on each side of a candidate change, hours.
    #[arg(long, default_value_t = 12.0)]
    window_hours: f64,
    /// Minimum mean temperature difference, °C.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Minimum spacing between reported changes, hours [default: window]
    #[arg(long)]
    refractory_hours: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Directory holding room manifests (*.json).
    #[arg(long)]
    rooms: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Events CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding room manifests (*.json).
    #[arg(long)]
    rooms: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Comma-separated analysis window lengths, hours.
    #[arg(long, value_delimiter = ',', default_value = "24,48,168,336,720")]
    windows: Vec<f64>,
    /// Gap left out on each side of a change, minutes [default: 15 on grids of
    /// 15 minutes or finer, otherwise 0]
    #[arg(long)]
    guard_minutes: Option<f64>,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Building power CSV for matched day-of-week comparisons.
    #[arg(long)]
    building: Option<PathBuf>,
    /// Days between the before window and the change.
    #[arg(long, default_value_t = 4)]
    days_before: u32,
    /// Days between the change and the after window.
    #[arg(long, default_value_t = 3)]
    days_after: u32,
    /// Length of each matched window, hours.
    #[arg(long, default_value_t = 1.0)]
    matched_window_hours: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Preset {
    /// 11 hourly rooms over two years with 67 setpoint changes.
    CampaignTwoYears,
    /// One room on a minute grid with seven 2 °C changes.
    MinuteSteps,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Plant configuration JSON; built-in defaults when omitted.
    #[arg(long)]
    plant: Option<PathBuf>,
    /// Hourly profile CSV with columns load_kw,outdoor_c; a synthetic
    /// temperate year when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Lower search bound, °C.
    #[arg(long, default_value_t = 18.0)]
    t_min: f64,
    /// Upper search bound, °C.
    #[arg(long, default_value_t = 35.0)]
    t_max: f64,
    /// Location tolerance, °C.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Spacing of the reported curve, °C.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results CSV written by `analyze`.
    #[arg(long)]
    results: PathBuf,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Detect(a) => commands::detect(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Report(a) => commands::report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
