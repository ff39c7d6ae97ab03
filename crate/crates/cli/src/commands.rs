use std::fs;
use std::path::{Path, PathBuf};

use gpsim::constellation::{coverage_sweep, ConstellationSpec, CoverageConfig};
use gpsim::harness::telemetry::{to_csv, to_json};
use gpsim::harness::{
    load_scenario, monte_carlo, run_mission, simulate_adcs, simulate_stationkeeping, MonteCarloSummary, Percentiles,
    Scenario, TelemetryRecord,
};
use gpsim::transfer::hohmann_plan;
use gpsim::BodyConstants;

use crate::output::{self, Table};
use crate::{Cli, Command, CoverageArgs, Format, PhaseArgs};

pub const OUT_DIR_ENV: &str = "GPSIM_OUT_DIR";

pub enum CliError {
    Usage(String),
    Core(gpsim::Error),
}

impl CliError {
    pub fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<gpsim::Error> for CliError {
    fn from(e: gpsim::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(gpsim::Error::Io(e.to_string()))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::PlanTransfer { r1, r2 } => plan_transfer(*r1, *r2, cli.format),
        Command::SimulateAdcs(args) => simulate_adcs_cmd(cli, args),
        Command::Stationkeep(args) => stationkeep(cli, args),
        Command::Coverage(args) => coverage(args, cli.format),
        Command::Mission { scenario, out } => mission(cli, scenario.as_deref(), out.clone()),
        Command::MonteCarlo { scenario, runs } => monte_carlo_cmd(cli, scenario.as_deref(), *runs),
    }
}

/// Scenario from file (or defaults) with the `--seed` override applied.
fn scenario(path: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = match path {
        Some(p) if !p.is_file() => {
            return Err(CliError::Usage(format!("scenario file not found: {}", p.display())));
        }
        Some(p) => load_scenario(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn telemetry_text(records: &[TelemetryRecord], format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => to_csv(records)?,
        Format::Json => to_json(records)?,
    })
}

fn write_telemetry(path: &Path, records: &[TelemetryRecord], format: Format) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, telemetry_text(records, format)?)?;
    Ok(())
}

fn plan_transfer(r1: f64, r2: f64, format: Format) -> Result<()> {
    let plan = hohmann_plan(r1, r2, &BodyConstants::default())?;
    let mut t = Table::default();
    t.put("r1_km", plan.r1 / 1e3)
        .put("r2_km", plan.r2 / 1e3)
        .put("a_transfer_km", plan.a_transfer / 1e3)
        .put("e_transfer", plan.e_transfer)
        .put("dv1_mps", plan.dv1)
        .put("dv2_mps", plan.dv2)
        .put("total_dv_mps", plan.total_dv())
        .put("time_of_flight_h", plan.time_of_flight / 3600.0);
    output::print(&t.render(format))?;
    Ok(())
}

fn simulate_adcs_cmd(cli: &Cli, args: &PhaseArgs) -> Result<()> {
    let s = scenario(args.scenario.as_deref(), cli.seed)?;
    let out = simulate_adcs(&s)?;
    if let Some(path) = &args.telemetry {
        write_telemetry(path, &out.telemetry, cli.format)?;
    }
    let m = &out.summary;
    let text = match cli.format {
        Format::Json => output::json(m),
        Format::Csv => {
            let mut t = Table::default();
            t.put("seed", s.seed)
                .put("duration_s", m.duration)
                .put("steps", m.steps)
                .opt("pointing_rms_deg", m.pointing_rms_deg)
                .opt("pointing_max_deg", m.pointing_max_deg)
                .opt("knowledge_rms_arcsec", m.knowledge_rms_arcsec)
                .put("final_pointing_deg", m.final_pointing_deg)
                .put("final_mode", m.final_mode.as_str())
                .put("mode_transitions", m.transitions.len())
                .put("rejected_measurements", m.rejected_measurements)
                .put("peak_wheel_fraction", m.peak_wheel_fraction)
                .put("thruster_propellant_kg", m.thruster_propellant_kg);
            t.render(Format::Csv)
        }
    };
    output::print(&text)?;
    Ok(())
}

fn stationkeep(cli: &Cli, args: &PhaseArgs) -> Result<()> {
    let s = scenario(args.scenario.as_deref(), cli.seed)?;
    let run = simulate_stationkeeping(&s)?;
    if let Some(path) = &args.telemetry {
        write_telemetry(path, &run.telemetry, cli.format)?;
    }
    let text = match cli.format {
        Format::Json => output::json(&serde_json::json!({
            "outcome": run.outcome,
            "lifetime": run.lifetime,
            "final_propellant_kg": run.final_propellant_kg,
        })),
        Format::Csv => {
            let (o, l) = (&run.outcome, &run.lifetime);
            let mut t = Table::default();
            t.put("horizon_days", s.stationkeeping.horizon / 86_400.0)
                .put("burns", o.burns.len())
                .put("total_dv_mps", o.total_dv)
                .put("propellant_kg", o.propellant_kg)
                .put("max_offset_deg", o.max_offset_deg)
                .put("final_offset_deg", o.final_offset_deg)
                .opt("depleted_at_s", o.depleted_at)
                .put("lifetime_years", l.years)
                .put("lifetime_dv_mps", l.total_dv)
                .put("lifetime_propellant_required_kg", l.propellant_required_kg)
                .put("lifetime_propellant_available_kg", l.propellant_available_kg)
                .put("lifetime_sufficient", l.sufficient);
            t.render(Format::Csv)
        }
    };
    output::print(&text)?;
    Ok(())
}

fn coverage(args: &CoverageArgs, format: Format) -> Result<()> {
    let body = BodyConstants::default();
    let spec = ConstellationSpec::even(
        args.planes,
        args.sats_per_plane,
        args.inclination.to_radians(),
        args.sma_km * 1e3,
    );
    spec.validate()?;
    let cfg = CoverageConfig {
        lat_step: args.grid.to_radians(),
        lon_step: args.grid.to_radians(),
        duration: args.duration.unwrap_or(0.0),
        step: args.step,
        elevation_mask: args.mask.to_radians(),
        ..CoverageConfig::default()
    };
    let map = coverage_sweep(&spec, &cfg, &body)?;
    let w = map.worst();
    eprintln!(
        "global_min={} at lat={:.1} lon={:.1} t={} s ({} epochs)",
        map.global_min,
        w.latitude.to_degrees(),
        w.longitude.to_degrees(),
        w.worst_epoch,
        map.epochs
    );
    let text = match format {
        Format::Csv => map.to_csv(),
        Format::Json => output::json(&map),
    };
    output::print(&text)?;
    Ok(())
}

fn mission(cli: &Cli, path: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let s = scenario(path, cli.seed)?;
    let dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gpsim-out"));
    let run = run_mission(&s)?;
    fs::create_dir_all(&dir)?;
    let ext = match cli.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let tel_path = dir.join(format!("telemetry.{ext}"));
    write_telemetry(&tel_path, &run.telemetry, cli.format)?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, output::json(&run.report))?;

    let r = &run.report;
    let mut t = Table::default();
    t.put("seed", r.seed)
        .put("gate_pass", r.insertion.gate.pass)
        .put("trim_dv_mps", r.trim.estimate.total_dv)
        .opt("pointing_rms_deg", r.adcs.as_ref().and_then(|a| a.pointing_rms_deg))
        .put("sk_burns", r.stationkeeping.as_ref().map_or(0, |k| k.burns.len()))
        .put("propellant_used_kg", r.propellant_used_kg())
        .put("lifetime_sufficient", r.lifetime.sufficient)
        .put("telemetry_rows", run.telemetry.len())
        .put("telemetry", tel_path.display().to_string())
        .put("report", report_path.display().to_string());
    output::print(&t.render(cli.format))?;
    Ok(())
}

fn percentile_rows(t: &mut Table, name: &str, p: Option<Percentiles>) {
    for (suffix, f) in [
        ("mean", (|p: &Percentiles| p.mean) as fn(&Percentiles) -> f64),
        ("p5", |p| p.p5),
        ("p50", |p| p.p50),
        ("p95", |p| p.p95),
    ] {
        t.opt(&format!("{name}_{suffix}"), p.as_ref().map(f));
    }
}

fn monte_carlo_cmd(cli: &Cli, path: Option<&Path>, runs: usize) -> Result<()> {
    let s = scenario(path, cli.seed)?;
    let sum: MonteCarloSummary = monte_carlo(&s, runs)?;
    let text = match cli.format {
        Format::Json => output::json(&sum),
        Format::Csv => {
            let mut t = Table::default();
            t.put("seed", s.seed)
                .put("runs", sum.runs)
                .put("completed", sum.completed)
                .put("gate_pass_rate", sum.gate_pass_rate)
                .put("gate_pass_std_error", sum.gate_pass_std_error)
                .put("trim_required", sum.trim_required_count)
                .put("trim_in_band", sum.trim_in_band_count);
            percentile_rows(&mut t, "trim_dv_mps", sum.trim_dv);
            percentile_rows(&mut t, "pointing_rms_deg", sum.pointing_rms_deg);
            percentile_rows(&mut t, "propellant_used_kg", sum.propellant_used_kg);
            for (kind, n) in &sum.errors {
                t.put(&format!("errors_{kind}"), *n);
            }
            t.render(Format::Csv)
        }
    };
    output::print(&text)?;
    Ok(())
}
