mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Mission analysis and simulation for a MEO navigation satellite.
#[derive(Debug, Parser)]
#[command(name = "gpsim", version, about)]
pub struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hohmann transfer between two circular orbits.
    PlanTransfer {
        /// Initial orbit radius (m).
        #[arg(long, allow_negative_numbers = true)]
        r1: f64,
        /// Final orbit radius (m).
        #[arg(long, allow_negative_numbers = true)]
        r2: f64,
    },
    /// ADCS closed loop from the nominal slot orbit.
    SimulateAdcs(PhaseArgs),
    /// Station-keeping over the scenario horizon, plus the lifetime projection.
    Stationkeep(PhaseArgs),
    /// Minimum satellites in view over a lat/lon grid.
    Coverage(CoverageArgs),
    /// Full mission; writes the report and telemetry to a directory.
    Mission {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output directory [default: $GPSIM_OUT_DIR, else ./gpsim-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded Monte Carlo sweep of the mission.
    MonteCarlo {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(short = 'n', long = "runs", default_value_t = 100)]
        runs: usize,
    },
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Also write the telemetry stream to this file.
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, default_value_t = 6)]
    pub planes: u32,
    #[arg(long, default_value_t = 4)]
    pub sats_per_plane: u32,
    /// Elevation mask (deg).
    #[arg(long, default_value_t = 5.0)]
    pub mask: f64,
    /// Grid spacing in latitude and longitude (deg).
    #[arg(long, default_value_t = 10.0)]
    pub grid: f64,
    /// Inclination (deg).
    #[arg(long, default_value_t = 55.0)]
    pub inclination: f64,
    /// Semi-major axis (km).
    #[arg(long, default_value_t = 26_560.0)]
    pub sma_km: f64,
    /// Sample step (s).
    #[arg(long, default_value_t = 60.0)]
    pub step: f64,
    /// Sweep length (s); one orbital period when omitted.
    #[arg(long)]
    pub duration: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            output::error_line("usage", first.trim_start_matches("error: "));
            eprintln!("hint: gpsim --help lists subcommands and flags");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            output::error_line(e.kind(), &e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
