//! Scenario files, the end-to-end mission pipeline, Monte Carlo sweeps and
//! telemetry output.

pub mod adcs_loop;
pub mod mission;
pub mod monte_carlo;
pub mod scenario;
pub mod telemetry;

pub use adcs_loop::{
    estimator_trial, momentum_dump_trial, run_adcs, AdcsConfig, AdcsOutcome, AdcsSummary, ControllerConfig,
    EstimatorTrial, EstimatorTrialConfig,
};
pub use mission::{
    nominal_orbit, run_mission, run_mission_with_rng, simulate_adcs, simulate_stationkeeping, MissionReport,
    MissionRun, StationkeepingRun,
};
pub use monte_carlo::{monte_carlo, monte_carlo_runs, summarize, MonteCarloSummary, Percentiles, RunRecord};
pub use scenario::{load_scenario, save_scenario, Scenario};
pub use telemetry::{TelemetryRecord, CSV_COLUMNS, TELEMETRY_FORMAT_VERSION};
