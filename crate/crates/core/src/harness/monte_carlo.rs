use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mission::{run_mission_with_rng, MissionReport};
use super::scenario::Scenario;
use crate::error::{Error, Result};

/// The per-run quantities a summary needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub gate_pass: bool,
    pub trim_required: bool,
    pub trim_dv: f64,
    pub trim_in_band: bool,
    pub pointing_rms_deg: Option<f64>,
    pub propellant_used_kg: f64,
}

impl From<&MissionReport> for RunMetrics {
    fn from(r: &MissionReport) -> Self {
        Self {
            gate_pass: r.insertion.gate.pass,
            trim_required: r.trim.required,
            trim_dv: r.trim.estimate.total_dv,
            trim_in_band: r.trim.within_band,
            pointing_rms_deg: r.adcs.as_ref().and_then(|a| a.pointing_rms_deg),
            propellant_used_kg: r.propellant_used_kg(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub result: std::result::Result<RunMetrics, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub mean: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Percentiles {
    /// Linear interpolation between order statistics; `None` for no data.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let x = p * (v.len() - 1) as f64;
            let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (x - lo as f64)
        };
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p5: at(0.05),
            p50: at(0.5),
            p95: at(0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub completed: usize,
    /// Runs whose insertion passed the gate untrimmed; failed runs count as misses.
    pub gate_pass_count: usize,
    pub gate_pass_rate: f64,
    /// Binomial standard error √(p(1−p)/n) of the pass rate.
    pub gate_pass_std_error: f64,
    pub trim_required_count: usize,
    /// Trimmed runs whose Δv fell inside the configured band.
    pub trim_in_band_count: usize,
    pub trim_dv: Option<Percentiles>,
    pub pointing_rms_deg: Option<Percentiles>,
    pub propellant_used_kg: Option<Percentiles>,
    /// Failed runs by error kind.
    pub errors: BTreeMap<String, usize>,
}

impl MonteCarloSummary {
    pub fn trim_in_band_fraction(&self) -> Option<f64> {
        (self.trim_required_count > 0).then(|| self.trim_in_band_count as f64 / self.trim_required_count as f64)
    }
}

/// RNG for run `index`: the scenario seed on stream `index`, so run 0 replays
/// a plain `mission` with the same seed.
pub fn run_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn one(s: &Scenario, index: usize) -> RunRecord {
    let result = run_mission_with_rng(s, &mut run_rng(s.seed, index)).map(|run| RunMetrics::from(&run.report));
    RunRecord { index, result }
}

/// Executes `n` runs, in parallel when `parallel` is set and the feature is
/// enabled. Records come back ordered by index either way.
pub fn monte_carlo_runs(s: &Scenario, n: usize, parallel: bool) -> Result<Vec<RunRecord>> {
    if n == 0 {
        return Err(Error::invalid("n_runs", "must be ≥ 1"));
    }
    s.validate()?;
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return Ok((0..n).into_par_iter().map(|i| one(s, i)).collect());
    }
    let _ = parallel;
    Ok((0..n).map(|i| one(s, i)).collect())
}

/// Summary statistics; independent of the order of `runs`.
pub fn summarize(runs: &[RunRecord]) -> MonteCarloSummary {
    let mut sorted: Vec<&RunRecord> = runs.iter().collect();
    sorted.sort_by_key(|r| r.index);
    let ok: Vec<&RunMetrics> = sorted.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let mut errors = BTreeMap::new();
    for r in &sorted {
        if let Err(e) = &r.result {
            *errors.entry(e.kind().to_string()).or_insert(0) += 1;
        }
    }
    let n = sorted.len();
    let gate_pass_count = ok.iter().filter(|m| m.gate_pass).count();
    let p = if n > 0 { gate_pass_count as f64 / n as f64 } else { 0.0 };
    let trims: Vec<f64> = ok.iter().filter(|m| m.trim_required).map(|m| m.trim_dv).collect();
    let pointing: Vec<f64> = ok.iter().filter_map(|m| m.pointing_rms_deg).collect();
    let fuel: Vec<f64> = ok.iter().map(|m| m.propellant_used_kg).collect();
    MonteCarloSummary {
        runs: n,
        completed: ok.len(),
        gate_pass_count,
        gate_pass_rate: p,
        gate_pass_std_error: if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { 0.0 },
        trim_required_count: trims.len(),
        trim_in_band_count: ok.iter().filter(|m| m.trim_required && m.trim_in_band).count(),
        trim_dv: Percentiles::of(&trims),
        pointing_rms_deg: Percentiles::of(&pointing),
        propellant_used_kg: Percentiles::of(&fuel),
        errors,
    }
}

pub fn monte_carlo(s: &Scenario, n: usize) -> Result<MonteCarloSummary> {
    Ok(summarize(&monte_carlo_runs(s, n, true)?))
}
