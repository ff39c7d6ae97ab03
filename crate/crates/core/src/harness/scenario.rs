use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adcs_loop::AdcsConfig;
use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::orbit::{BodyConstants, PerturbationConfig};
use crate::stationkeeping::{FuelBudget, MonitorConfig, SlotSpec, SECONDS_PER_DAY};
use crate::transfer::{InsertionTolerances, StageSpec, TrimRegime, DEFAULT_REQUIRED_INSERTION_DV};

/// Complete run configuration. Every block is optional in a scenario file;
/// missing keys take the defaults below and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub body: BodyConstants,
    pub perturbations: PerturbationConfig,
    pub launch: LaunchConfig,
    pub transfer: TransferConfig,
    pub insertion: InsertionErrorModel,
    pub tolerances: InsertionTolerances,
    pub trim: TrimConfig,
    pub adcs: AdcsConfig,
    pub stationkeeping: StationkeepingConfig,
    pub constellation: ConstellationSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            body: BodyConstants::default(),
            perturbations: PerturbationConfig::default(),
            launch: LaunchConfig::default(),
            transfer: TransferConfig::default(),
            insertion: InsertionErrorModel::default(),
            tolerances: InsertionTolerances::default(),
            trim: TrimConfig::default(),
            adcs: AdcsConfig::default(),
            stationkeeping: StationkeepingConfig::default(),
            constellation: ConstellationSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaunchConfig {
    pub stages: Vec<StageSpec>,
    /// Gravity and drag losses subtracted from the ideal stage sum (m/s).
    pub gravity_loss: f64,
    pub required_dv: f64,
}

impl Default for LaunchConfig {
    fn default() -> Self {
        Self {
            stages: vec![
                StageSpec::new("first", 290.0, 420_000.0, 130_000.0),
                StageSpec::new("second", 348.0, 80_000.0, 12_000.0),
                StageSpec::new("upper", 320.0, 11_000.0, 5_000.0),
            ],
            gravity_loss: 2_000.0,
            required_dv: DEFAULT_REQUIRED_INSERTION_DV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    /// Parking-orbit radius (m).
    pub r1: f64,
    /// Target orbit radius (m).
    pub r2: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            r1: 6_578e3,
            r2: 26_560e3,
        }
    }
}

/// Gaussian dispersions on the apogee burn.
///
/// A pointing error of θ degrees on the burn becomes a velocity error of
/// `velocity_per_degree · θ` m/s; it is drawn isotropically, with each
/// inertial axis getting σ = `velocity_per_degree · misalignment_sigma_deg`.
/// A timing error δt displaces the burn point along-track by `v_apogee · δt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsertionErrorModel {
    pub misalignment_sigma_deg: f64,
    /// Velocity error per degree of misalignment (m/s/deg).
    pub velocity_per_degree: f64,
    pub timing_sigma_s: f64,
}

impl Default for InsertionErrorModel {
    fn default() -> Self {
        Self {
            misalignment_sigma_deg: 0.1,
            velocity_per_degree: 50.0,
            timing_sigma_s: 1.0,
        }
    }
}

impl InsertionErrorModel {
    pub fn none() -> Self {
        Self {
            misalignment_sigma_deg: 0.0,
            timing_sigma_s: 0.0,
            ..Self::default()
        }
    }

    /// Per-axis velocity σ (m/s).
    pub fn velocity_sigma(&self) -> f64 {
        self.velocity_per_degree * self.misalignment_sigma_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrimConfig {
    pub regime: TrimRegime,
    /// Expected trim range (m/s); runs inside it are counted in summaries.
    pub band_min: f64,
    pub band_max: f64,
    /// Apogee-propulsion propellant reserved for the insertion trim (kg),
    /// separate from the station-keeping tank.
    pub propellant: f64,
    pub isp: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self {
            regime: TrimRegime::default(),
            band_min: 10.0,
            band_max: 20.0,
            propellant: 80.0,
            isp: 315.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationkeepingConfig {
    pub slot: SlotSpec,
    pub fuel: FuelBudget,
    pub monitor: MonitorConfig,
    /// Simulated station-keeping span (s); 0 skips the phase.
    pub horizon: f64,
    /// Propagation step (s).
    pub step: f64,
    /// Spacing of the element samples fed to the drift monitor (s).
    pub sample_interval: f64,
    /// Samples collected before the first drift fit, and after each burn.
    pub min_samples: usize,
    /// Lifetime used for the end-of-run fuel projection (years).
    pub lifetime_years: u32,
}

impl Default for StationkeepingConfig {
    fn default() -> Self {
        Self {
            slot: SlotSpec::default(),
            fuel: FuelBudget::default(),
            monitor: MonitorConfig::default(),
            horizon: 60.0 * SECONDS_PER_DAY,
            step: 60.0,
            sample_interval: SECONDS_PER_DAY,
            min_samples: 5,
            lifetime_years: 15,
        }
    }
}

fn nested(prefix: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    })
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be ≥ 0, got {v}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        self.perturbations.validate()?;

        if self.launch.stages.is_empty() {
            return Err(Error::invalid("launch.stages", "at least one stage is required"));
        }
        for (k, s) in self.launch.stages.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::invalid(format!("launch.stages[{k}]"), e.to_string()))?;
        }
        non_negative("launch.gravity_loss", self.launch.gravity_loss)?;
        non_negative("launch.required_dv", self.launch.required_dv)?;

        positive("transfer.r1", self.transfer.r1)?;
        positive("transfer.r2", self.transfer.r2)?;
        if self.transfer.r1 <= self.body.re {
            return Err(Error::invalid("transfer.r1", "parking orbit is below the surface"));
        }

        non_negative(
            "insertion.misalignment_sigma_deg",
            self.insertion.misalignment_sigma_deg,
        )?;
        non_negative("insertion.velocity_per_degree", self.insertion.velocity_per_degree)?;
        non_negative("insertion.timing_sigma_s", self.insertion.timing_sigma_s)?;

        self.tolerances.validate()?;
        let r = &self.trim.regime;
        positive("trim.regime.max_relative_sma", r.max_relative_sma)?;
        positive("trim.regime.max_ecc_change", r.max_ecc_change)?;
        positive("trim.regime.max_inc_change", r.max_inc_change)?;
        non_negative("trim.band_min", self.trim.band_min)?;
        non_negative("trim.propellant", self.trim.propellant)?;
        positive("trim.isp", self.trim.isp)?;
        if !(self.trim.band_max >= self.trim.band_min) {
            return Err(Error::invalid("trim.band_max", "must be ≥ trim.band_min"));
        }

        nested("adcs", self.adcs.validate())?;

        let sk = &self.stationkeeping;
        nested("stationkeeping", sk.slot.validate())?;
        nested("stationkeeping", sk.fuel.validate())?;
        positive("stationkeeping.monitor.horizon", sk.monitor.horizon)?;
        non_negative("stationkeeping.horizon", sk.horizon)?;
        positive("stationkeeping.step", sk.step)?;
        positive("stationkeeping.sample_interval", sk.sample_interval)?;
        if sk.sample_interval < sk.step {
            return Err(Error::invalid(
                "stationkeeping.sample_interval",
                "must be ≥ stationkeeping.step",
            ));
        }
        if sk.min_samples < 2 {
            return Err(Error::invalid("stationkeeping.min_samples", "must be ≥ 2"));
        }
        if (sk.slot.semi_major_axis - self.transfer.r2).abs() > 1.0 {
            return Err(Error::invalid(
                "stationkeeping.slot.semi_major_axis",
                format!("must equal transfer.r2 ({} m)", self.transfer.r2),
            ));
        }

        self.constellation.validate()?;
        Ok(())
    }

    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Canonical text form: pretty JSON with every field present.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, s.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::launch_budget;

    #[test]
    fn seed_only_file_takes_defaults() {
        let s = Scenario::from_json(r#"{ "seed": 99 }"#).unwrap();
        assert_eq!(
            s,
            Scenario {
                seed: 99,
                ..Scenario::default()
            }
        );
    }

    #[test]
    fn default_launch_closes_budget() {
        let l = LaunchConfig::default();
        let b = launch_budget(&l.stages, l.gravity_loss, l.required_dv).unwrap();
        assert!(!b.shortfall, "net {}", b.net_dv);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = Scenario::from_json(r#"{ "seed": 1, "sead": 2 }"#).unwrap_err();
        assert!(
            matches!(&err, Error::Parse(m) if m.contains("sead") && m.contains("line")),
            "{err}"
        );
        let nested = Scenario::from_json(r#"{ "adcs": { "dt": 0.1, "bogus": 1 } }"#).unwrap_err();
        assert!(matches!(&nested, Error::Parse(m) if m.contains("bogus")), "{nested}");
    }

    #[test]
    fn negative_inertia_names_the_field() {
        let text = r#"{ "adcs": { "inertia": { "matrix": [[1200,0,0],[0,-5,0],[0,0,800]] } } }"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(err.to_string().contains("inertia[1][1]"), "{err}");
    }

    #[test]
    fn validation_errors_carry_full_path() {
        let mut s = Scenario::default();
        s.adcs.dt = -1.0;
        assert!(matches!(s.validate(), Err(Error::Validation { field, .. }) if field == "adcs.dt"));
        let mut s = Scenario::default();
        s.stationkeeping.fuel.isp = 0.0;
        assert!(matches!(s.validate(), Err(Error::Validation { field, .. }) if field == "stationkeeping.fuel.isp"));
        let mut s = Scenario::default();
        s.adcs.sensors.star_tracker_sigma = -1.0;
        assert!(
            matches!(s.validate(), Err(Error::Validation { field, .. }) if field == "adcs.sensors.star_tracker_sigma")
        );
    }

    #[test]
    fn canonical_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let mut s = Scenario {
            seed: 12345,
            ..Scenario::default()
        };
        s.adcs.duration = 60.0;
        save_scenario(&s, &path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), s.to_json());
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Scenario::from_json("{\n  \"seed\": ,\n}").unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("line 2")), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_scenario("/nonexistent/x.json"), Err(Error::Io(_))));
    }
}
