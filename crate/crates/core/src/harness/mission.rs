//! End-to-end mission: launch budget, Hohmann plan, dispersed insertion,
//! tolerance gate and trim, ADCS checkout, then station-keeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adcs_loop::{run_adcs, telemetry_row, AdcsSummary, RowContext};
use super::scenario::Scenario;
use super::telemetry::{validate_stream, TelemetryRecord};
use crate::attitude::RigidBodyState;
use crate::control::{nadir_target, ModeKind};
use crate::error::{Error, Result};
use crate::estimation::EstimatorState;
use crate::math::Vec3;
use crate::orbit::{
    elements_to_state, propagate_with, state_to_elements, vis_viva_speed, KeplerianElements, StateVector,
};
use crate::stationkeeping::{annual_schedule, apply_maneuver, longitude_drift_monitor, slot_offset, FuelBudget};
use crate::transfer::{
    check_insertion, hohmann_plan, launch_budget, trim_dv_estimate, HohmannPlan, InsertionReport, LaunchBudget,
    TrimEstimate,
};
use crate::G0;

pub const FLAG_SK_PHASE: &str = "SK_PHASE";
pub const FLAG_SK_BURN: &str = "SK_BURN";
pub const FLAG_FUEL_DEPLETED: &str = "FUEL_DEPLETED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionOutcome {
    /// Sampled burn velocity error, inertial (m/s).
    pub velocity_error: Vec3,
    pub timing_error_s: f64,
    pub target: KeplerianElements,
    pub achieved: KeplerianElements,
    pub gate: InsertionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimOutcome {
    pub required: bool,
    /// Zero when the gate passed.
    pub estimate: TrimEstimate,
    /// Drawn from the trim allocation, not the station-keeping tank.
    pub propellant_kg: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationkeepingBurn {
    pub epoch: f64,
    pub delta_a: f64,
    pub dv: f64,
    pub propellant_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationkeepingOutcome {
    pub burns: Vec<StationkeepingBurn>,
    pub total_dv: f64,
    pub propellant_kg: f64,
    pub max_offset_deg: f64,
    pub final_offset_deg: f64,
    /// Epoch at which a burn could not be paid for; the satellite drifts after it.
    pub depleted_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeProjection {
    pub years: u32,
    pub total_dv: f64,
    pub propellant_required_kg: f64,
    pub propellant_available_kg: f64,
    pub sufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub seed: u64,
    pub launch: LaunchBudget,
    pub transfer: HohmannPlan,
    pub insertion: InsertionOutcome,
    pub trim: TrimOutcome,
    pub adcs: Option<AdcsSummary>,
    pub stationkeeping: Option<StationkeepingOutcome>,
    /// Station-keeping tank at insertion and at the end of the run (kg).
    pub initial_propellant_kg: f64,
    pub final_propellant_kg: f64,
    pub lifetime: LifetimeProjection,
}

impl MissionReport {
    /// Trim plus station-keeping-tank propellant (kg).
    pub fn propellant_used_kg(&self) -> f64 {
        self.trim.propellant_kg + self.initial_propellant_kg - self.final_propellant_kg
    }
}

#[derive(Debug, Clone)]
pub struct MissionRun {
    pub report: MissionReport,
    pub telemetry: Vec<TelemetryRecord>,
}

/// Runs the mission with the scenario seed.
pub fn run_mission(s: &Scenario) -> Result<MissionRun> {
    run_mission_with_rng(s, &mut ChaCha8Rng::seed_from_u64(s.seed))
}

/// Runs the mission drawing every random quantity from `rng`, in phase order.
pub fn run_mission_with_rng<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<MissionRun> {
    s.validate()?;
    let body = &s.body;

    let launch = launch_budget(&s.launch.stages, s.launch.gravity_loss, s.launch.required_dv)?;
    if launch.shortfall {
        return Err(Error::BudgetShortfall {
            net_dv: launch.net_dv,
            required_dv: launch.required_dv,
        });
    }
    let plan = hohmann_plan(s.transfer.r1, s.transfer.r2, body)?;

    let (insertion, mut sv) = insert(s, &plan, rng)?;
    let fuel0 = s.stationkeeping.fuel;
    let mut fuel = fuel0;

    let trim = if insertion.gate.pass {
        TrimOutcome {
            required: false,
            estimate: TrimEstimate::default(),
            propellant_kg: 0.0,
            within_band: false,
        }
    } else {
        let estimate =
            trim_dv_estimate(&insertion.achieved, &insertion.target, body, &s.trim.regime).map_err(|e| match e {
                Error::OutOfRange(msg) => Error::GateFailure(msg),
                other => other,
            })?;
        let tank = FuelBudget {
            propellant: s.trim.propellant,
            isp: s.trim.isp,
            dry_mass: fuel.total_mass(),
        };
        let used = s.trim.propellant - apply_maneuver(&tank, estimate.total_dv)?.propellant;
        // the trim lands on the target shape and plane at the current phase
        let a = &insertion.achieved;
        let corrected = KeplerianElements::circular(insertion.target.a, insertion.target.i, a.raan, a.arg_latitude());
        sv = elements_to_state(&corrected, body)?;
        TrimOutcome {
            required: true,
            estimate,
            propellant_kg: used,
            within_band: (s.trim.band_min..=s.trim.band_max).contains(&estimate.total_dv),
        }
    };

    let mut telemetry = Vec::new();
    let mut attitude = None;
    let mut mode = ModeKind::NominalPointing;
    let adcs = if s.adcs.duration > 0.0 {
        let out = run_adcs(&s.adcs, body, &s.perturbations, &sv, &fuel, rng)?;
        telemetry = out.telemetry;
        sv = out.orbit;
        fuel = out.fuel;
        mode = out.mode.kind;
        attitude = Some((out.truth, out.estimate));
        Some(out.summary)
    } else {
        None
    };

    let stationkeeping = if s.stationkeeping.horizon > 0.0 {
        let (sk, end_fuel) = station_keep(s, &sv, fuel, attitude, mode, &mut telemetry)?;
        fuel = end_fuel;
        Some(sk)
    } else {
        None
    };

    validate_stream(&telemetry)?;
    let lifetime = project_lifetime(s, &fuel)?;
    Ok(MissionRun {
        report: MissionReport {
            seed: s.seed,
            launch,
            transfer: plan,
            insertion,
            trim,
            adcs,
            stationkeeping,
            initial_propellant_kg: fuel0.propellant,
            final_propellant_kg: fuel.propellant,
            lifetime,
        },
        telemetry,
    })
}

/// Circular slot orbit at t = 0, the starting point for standalone phases.
pub fn nominal_orbit(s: &Scenario) -> Result<StateVector> {
    let slot = &s.stationkeeping.slot;
    let el = KeplerianElements::circular(
        slot.semi_major_axis,
        slot.target_inclination,
        0.0,
        slot.target_longitude,
    );
    elements_to_state(&el, &s.body)
}

/// ADCS phase alone, from the nominal orbit with a full tank.
pub fn simulate_adcs(s: &Scenario) -> Result<super::adcs_loop::AdcsOutcome> {
    s.validate()?;
    let sv = nominal_orbit(s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    run_adcs(
        &s.adcs,
        &s.body,
        &s.perturbations,
        &sv,
        &s.stationkeeping.fuel,
        &mut rng,
    )
}

#[derive(Debug, Clone)]
pub struct StationkeepingRun {
    pub outcome: StationkeepingOutcome,
    pub lifetime: LifetimeProjection,
    pub final_propellant_kg: f64,
    pub telemetry: Vec<TelemetryRecord>,
}

/// Station-keeping phase alone, from the nominal orbit with a full tank.
pub fn simulate_stationkeeping(s: &Scenario) -> Result<StationkeepingRun> {
    s.validate()?;
    let sv = nominal_orbit(s)?;
    let mut telemetry = Vec::new();
    let (outcome, fuel) = station_keep(
        s,
        &sv,
        s.stationkeeping.fuel,
        None,
        ModeKind::NominalPointing,
        &mut telemetry,
    )?;
    validate_stream(&telemetry)?;
    Ok(StationkeepingRun {
        outcome,
        lifetime: project_lifetime(s, &fuel)?,
        final_propellant_kg: fuel.propellant,
        telemetry,
    })
}

/// Apogee burn with sampled misalignment and timing errors. The nominal
/// transfer has its apogee at the slot's argument of latitude, so the
/// insertion epoch (t = 0) puts the satellite at the slot centre.
fn insert<R: Rng + ?Sized>(s: &Scenario, plan: &HohmannPlan, rng: &mut R) -> Result<(InsertionOutcome, StateVector)> {
    let body = &s.body;
    let slot = &s.stationkeeping.slot;
    let target = KeplerianElements::circular(plan.r2, slot.target_inclination, 0.0, slot.target_longitude);
    let nominal = elements_to_state(&target, body)?;
    let r_hat = nominal.position.normalize();
    let t_hat = nominal.velocity.normalize();

    let sigma_v = s.insertion.velocity_sigma();
    let dv_err = Vec3::from_fn(|_, _| {
        let n: f64 = StandardNormal.sample(rng);
        sigma_v * n
    });
    let timing = Normal::new(0.0, s.insertion.timing_sigma_s)
        .map_err(|e| Error::Configuration(e.to_string()))?
        .sample(rng);

    let v_apogee = vis_viva_speed(plan.r2, plan.a_transfer, body)?;
    let position = r_hat * plan.r2 + t_hat * (v_apogee * timing);
    let velocity = t_hat * (v_apogee + plan.dv2) + dv_err;
    let sv = StateVector::new(position, velocity, 0.0);
    let achieved = state_to_elements(&sv, body)?;
    let gate = check_insertion(&achieved, &target, &s.tolerances);
    Ok((
        InsertionOutcome {
            velocity_error: dv_err,
            timing_error_s: timing,
            target,
            achieved,
            gate,
        },
        sv,
    ))
}

/// Propagates over the horizon, sampling elements for the drift monitor and
/// executing its SMA trims as tangential impulses. Attitude is assumed held
/// at the nadir target between samples.
fn station_keep(
    s: &Scenario,
    start: &StateVector,
    mut fuel: FuelBudget,
    attitude: Option<(RigidBodyState, EstimatorState)>,
    mode: ModeKind,
    telemetry: &mut Vec<TelemetryRecord>,
) -> Result<(StationkeepingOutcome, FuelBudget)> {
    let cfg = &s.stationkeeping;
    let body = &s.body;
    let sun = s.perturbations.sun_direction;
    let (wheel_momentum, bias) = match &attitude {
        Some((truth, est)) => (truth.wheel_momentum, est.bias_hat),
        None => (Vec3::zeros(), Vec3::zeros()),
    };
    let t_start = start.epoch;
    let t_end = t_start + cfg.horizon;

    let mut sv = *start;
    let mut history: Vec<(f64, KeplerianElements)> = vec![(sv.epoch, state_to_elements(&sv, body)?)];
    let mut out = StationkeepingOutcome {
        burns: Vec::new(),
        total_dv: 0.0,
        propellant_kg: 0.0,
        max_offset_deg: 0.0,
        final_offset_deg: 0.0,
        depleted_at: None,
    };
    let n_samples = (cfg.horizon / cfg.sample_interval).ceil() as u64;
    for k in 1..=n_samples {
        let t_next = (t_start + k as f64 * cfg.sample_interval).min(t_end);
        sv = propagate_with(&sv, t_next - sv.epoch, cfg.step, &s.perturbations, body, |_| {})?;
        sv.epoch = t_next;
        let el = state_to_elements(&sv, body)?;
        let offset = slot_offset(&el, sv.epoch, &cfg.slot, body)?;
        out.max_offset_deg = out.max_offset_deg.max(offset.abs().to_degrees());
        out.final_offset_deg = offset.to_degrees();
        history.push((sv.epoch, el));

        let mut flags = vec![FLAG_SK_PHASE];
        if out.depleted_at.is_some() {
            flags.push(FLAG_FUEL_DEPLETED);
        } else if history.len() >= cfg.min_samples {
            let report = longitude_drift_monitor(&history, &cfg.slot, &cfg.monitor, body)?;
            if let Some(m) = report.maneuver {
                let r = sv.radius();
                let v_new = vis_viva_speed(r, el.a + m.delta_a, body)?;
                let dv = (v_new - sv.speed()).abs();
                match apply_maneuver(&fuel, dv) {
                    Ok(after) => {
                        let used = fuel.propellant - after.propellant;
                        fuel = after;
                        sv.velocity *= v_new / sv.speed();
                        out.burns.push(StationkeepingBurn {
                            epoch: sv.epoch,
                            delta_a: m.delta_a,
                            dv,
                            propellant_kg: used,
                        });
                        out.total_dv += dv;
                        out.propellant_kg += used;
                        flags.push(FLAG_SK_BURN);
                        history.clear();
                        history.push((sv.epoch, state_to_elements(&sv, body)?));
                    }
                    Err(Error::FuelDepleted { .. }) => {
                        out.depleted_at = Some(sv.epoch);
                        flags.push(FLAG_FUEL_DEPLETED);
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let q = nadir_target(&sv.position, &sv.velocity, &sun)?;
        let truth = RigidBodyState {
            q,
            omega: Vec3::zeros(),
            wheel_momentum,
            epoch: sv.epoch,
        };
        let est = EstimatorState {
            bias_hat: bias,
            ..EstimatorState::with_sigmas(q, 0.0, 0.0, sv.epoch)
        };
        let ctx = RowContext {
            orbit: &sv,
            body,
            mode,
            fuel_kg: fuel.propellant,
            flags: &flags,
        };
        telemetry.push(telemetry_row(&truth, &est, &Vec3::zeros(), 0.0, &ctx)?);
    }
    Ok((out, fuel))
}

fn project_lifetime(s: &Scenario, fuel: &FuelBudget) -> Result<LifetimeProjection> {
    let cfg = &s.stationkeeping;
    let plan = annual_schedule(cfg.lifetime_years, &cfg.slot, &s.body)?;
    let total_dv: f64 = plan.iter().map(|m| m.dv).sum();
    let required = fuel.total_mass() * (1.0 - (-total_dv / (fuel.isp * G0)).exp());
    Ok(LifetimeProjection {
        years: cfg.lifetime_years,
        total_dv,
        propellant_required_kg: required,
        propellant_available_kg: fuel.propellant,
        sufficient: required <= fuel.propellant,
    })
}
