//! Slot keeping: longitude-window monitoring, trim sizing, inclination
//! correction and propellant accounting.
//!
//! Longitude is the along-track phase `Ω + u` measured against a slot
//! reference that advances at the slot's Keplerian mean motion. No
//! Earth-fixed frame is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::wrap_pi;
use crate::orbit::{circular_speed, mean_motion, vis_viva_speed, BodyConstants, KeplerianElements};
use crate::G0;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.25 * SECONDS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuelBudget {
    /// Remaining propellant (kg).
    pub propellant: f64,
    pub isp: f64,
    pub dry_mass: f64,
}

impl Default for FuelBudget {
    fn default() -> Self {
        Self {
            propellant: 50.0,
            isp: 220.0,
            dry_mass: 3_830.0,
        }
    }
}

impl FuelBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.propellant >= 0.0 && self.propellant.is_finite()) {
            return Err(Error::invalid("fuel.propellant", "must be ≥ 0"));
        }
        if !(self.isp > 0.0 && self.isp.is_finite()) {
            return Err(Error::invalid("fuel.isp", "must be positive"));
        }
        if !(self.dry_mass > 0.0 && self.dry_mass.is_finite()) {
            return Err(Error::invalid("fuel.dry_mass", "must be positive"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.dry_mass + self.propellant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlotSpec {
    /// Slot phase `Ω + u` at epoch 0 (rad).
    pub target_longitude: f64,
    pub window_halfwidth: f64,
    pub target_inclination: f64,
    /// rad per year.
    pub inclination_drift_rate: f64,
    /// Nominal slot semi-major axis; sets the reference drift rate (m).
    pub semi_major_axis: f64,
}

impl Default for SlotSpec {
    fn default() -> Self {
        Self {
            target_longitude: 0.0,
            window_halfwidth: 2f64.to_radians(),
            target_inclination: 55f64.to_radians(),
            inclination_drift_rate: 0.02f64.to_radians(),
            semi_major_axis: 26_560e3,
        }
    }
}

impl SlotSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_halfwidth > 0.0 && self.window_halfwidth.is_finite()) {
            return Err(Error::invalid("slot.window_halfwidth", "must be positive"));
        }
        if !(self.inclination_drift_rate >= 0.0 && self.inclination_drift_rate.is_finite()) {
            return Err(Error::invalid("slot.inclination_drift_rate", "must be ≥ 0"));
        }
        if !(self.semi_major_axis > 0.0 && self.semi_major_axis.is_finite()) {
            return Err(Error::invalid("slot.semi_major_axis", "must be positive"));
        }
        if !self.target_longitude.is_finite() || !self.target_inclination.is_finite() {
            return Err(Error::invalid("slot.target_longitude", "must be finite"));
        }
        Ok(())
    }
}

/// `√(μ(2/r − 1/a)) − √(μ/a)`: speed on an orbit of semi-major axis `a`
/// at radius `r`, relative to circular speed at `a`.
pub fn stationkeeping_dv(r: f64, a: f64, body: &BodyConstants) -> Result<f64> {
    if !(r > 0.0 && a > 0.0) {
        return Err(Error::domain(format!("r = {r}, a = {a} must both be positive")));
    }
    if !(2.0 / r > 1.0 / a) {
        return Err(Error::domain(format!(
            "r = {r} m is beyond reach of an ellipse with a = {a} m"
        )));
    }
    if r == a {
        return Ok(0.0);
    }
    Ok(vis_viva_speed(r, a, body)? - circular_speed(a, body)?)
}

/// Plane change at speed `v`: `2v·sin(Δi/2)`.
pub fn inclination_correction_dv(delta_i: f64, v: f64) -> Result<f64> {
    if !(delta_i >= 0.0) {
        return Err(Error::domain(format!("inclination change {delta_i} rad must be ≥ 0")));
    }
    Ok(2.0 * v * (delta_i / 2.0).sin())
}

/// Consumes propellant for `dv` with the inverted rocket equation.
pub fn apply_maneuver(budget: &FuelBudget, dv: f64) -> Result<FuelBudget> {
    if !(dv >= 0.0 && dv.is_finite()) {
        return Err(Error::domain(format!("maneuver Δv {dv} m/s must be ≥ 0")));
    }
    let used = budget.total_mass() * (1.0 - (-dv / (budget.isp * G0)).exp());
    if used > budget.propellant {
        return Err(Error::FuelDepleted {
            needed_kg: used,
            available_kg: budget.propellant,
        });
    }
    Ok(FuelBudget {
        propellant: (budget.propellant - used).max(0.0),
        ..*budget
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// Look-ahead for window exits (s).
    pub horizon: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0 * SECONDS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverRecommendation {
    /// Semi-major-axis change (m); positive raises the orbit.
    pub delta_a: f64,
    /// Δv magnitude (m/s).
    pub dv: f64,
    /// Longitude-rate change the trim produces (rad/s).
    pub rate_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Fitted slot offset at the last sample (rad).
    pub offset: f64,
    /// Fitted drift rate (rad/s).
    pub rate: f64,
    /// Offset projected to the end of the horizon (rad).
    pub projected_offset: f64,
    /// Seconds after the last sample until the window edge is crossed, if within the horizon.
    pub time_to_exit: Option<f64>,
    pub maneuver: Option<ManeuverRecommendation>,
}

/// Slot offset of one element set at `epoch` (rad, wrapped to ±π).
pub fn slot_offset(el: &KeplerianElements, epoch: f64, slot: &SlotSpec, body: &BodyConstants) -> Result<f64> {
    let n0 = mean_motion(slot.semi_major_axis, body)?;
    Ok(wrap_pi(
        el.raan + el.arg_latitude() - slot.target_longitude - n0 * epoch,
    ))
}

/// Fits a line to the slot offset over `(epoch, elements)` samples and
/// recommends an SMA trim when the projected offset leaves the window
/// within the horizon. The trim sets the drift so the satellite returns to
/// the slot centre over one horizon, which always opposes the projected
/// excursion.
pub fn longitude_drift_monitor(
    history: &[(f64, KeplerianElements)],
    slot: &SlotSpec,
    cfg: &MonitorConfig,
    body: &BodyConstants,
) -> Result<DriftReport> {
    if history.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "drift fit needs ≥ 2 samples, got {}",
            history.len()
        )));
    }
    slot.validate()?;
    // unwrap so a crossing of ±π does not break the fit
    let mut ts = Vec::with_capacity(history.len());
    let mut ys: Vec<f64> = Vec::with_capacity(history.len());
    for (t, el) in history {
        let raw = slot_offset(el, *t, slot, body)?;
        let y = match ys.last() {
            Some(prev) => prev + wrap_pi(raw - prev),
            None => raw,
        };
        ts.push(*t);
        ys.push(y);
    }
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("drift fit needs distinct epochs".into()));
    }
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let rate = sxy / sxx;
    let t_last = *ts.last().unwrap();
    let offset = ym + rate * (t_last - tm);
    let projected = offset + rate * cfg.horizon;
    let hw = slot.window_halfwidth;

    let time_to_exit = if offset.abs() > hw {
        Some(0.0)
    } else if rate != 0.0 {
        let edge = hw.copysign(rate);
        let t = (edge - offset) / rate;
        (t <= cfg.horizon).then_some(t)
    } else {
        None
    };

    let maneuver = if time_to_exit.is_some() {
        let a = slot.semi_major_axis;
        let n0 = mean_motion(a, body)?;
        let rate_change = -projected / cfg.horizon;
        // dλ/dt = −(3/2)(Δa/a)·n
        let delta_a = -rate_change * a / (1.5 * n0);
        let dv = stationkeeping_dv(a - delta_a.abs(), a, body)?;
        Some(ManeuverRecommendation {
            delta_a,
            dv,
            rate_change,
        })
    } else {
        None
    };
    Ok(DriftReport {
        offset,
        rate,
        projected_offset: projected,
        time_to_exit,
        maneuver,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledManeuver {
    pub epoch: f64,
    pub label: String,
    pub dv: f64,
}

/// Yearly cycle: one 1 km SMA trim and one inclination correction sized by
/// the slot's annual drift.
pub fn annual_schedule(years: u32, slot: &SlotSpec, body: &BodyConstants) -> Result<Vec<ScheduledManeuver>> {
    slot.validate()?;
    let a = slot.semi_major_axis;
    let trim = stationkeeping_dv(a - 1_000.0, a, body)?;
    let incl = inclination_correction_dv(slot.inclination_drift_rate, circular_speed(a, body)?)?;
    let mut out = Vec::with_capacity(2 * years as usize);
    for y in 0..years {
        let t = y as f64 * SECONDS_PER_YEAR;
        out.push(ScheduledManeuver {
            epoch: t + 0.25 * SECONDS_PER_YEAR,
            label: "sma-trim".into(),
            dv: trim,
        });
        out.push(ScheduledManeuver {
            epoch: t + 0.75 * SECONDS_PER_YEAR,
            label: "inclination".into(),
            dv: incl,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub total_dv: f64,
    pub propellant_used: f64,
    pub remaining: FuelBudget,
}

/// Runs maneuvers in order against the budget; stops with a fuel-depleted
/// error at the first one that cannot be paid for.
pub fn execute_schedule(budget: &FuelBudget, plan: &[ScheduledManeuver]) -> Result<ScheduleOutcome> {
    budget.validate()?;
    let mut b = *budget;
    let mut total_dv = 0.0;
    for m in plan {
        b = apply_maneuver(&b, m.dv)?;
        total_dv += m.dv;
    }
    Ok(ScheduleOutcome {
        total_dv,
        propellant_used: budget.propellant - b.propellant,
        remaining: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{rocket_dv, StageSpec};
    use approx::assert_relative_eq;

    const A: f64 = 26_560e3;
    const E: BodyConstants = BodyConstants::EARTH;

    #[test]
    fn circular_identity_is_exact() {
        assert_eq!(stationkeeping_dv(A, A, &E).unwrap(), 0.0);
    }

    #[test]
    fn one_km_trim() {
        assert_relative_eq!(
            stationkeeping_dv(A - 1_000.0, A, &E).unwrap(),
            0.145_859_498_859_863_38,
            max_relative = 1e-9
        );
    }

    #[test]
    fn slope_matches_vis_viva_derivative() {
        let h = 10.0;
        let slope = (stationkeeping_dv(A - h, A, &E).unwrap() - stationkeeping_dv(A + h, A, &E).unwrap()) / (2.0 * h);
        let analytic = E.mu / (A * A * circular_speed(A, &E).unwrap());
        assert_relative_eq!(slope, analytic, max_relative = 0.01);
        assert_relative_eq!(analytic, 1.458_567_529_596_108e-4, max_relative = 1e-9);
    }

    #[test]
    fn hyperbolic_radius_is_a_domain_error() {
        assert!(matches!(stationkeeping_dv(3.0 * A, A, &E), Err(Error::Domain(_))));
        assert!(stationkeeping_dv(-1.0, A, &E).is_err());
    }

    #[test]
    fn plane_change_cost() {
        assert_eq!(inclination_correction_dv(0.0, 3874.0).unwrap(), 0.0);
        assert_relative_eq!(
            inclination_correction_dv(0.02f64.to_radians(), 3874.0).unwrap(),
            1.352,
            max_relative = 1e-3
        );
        assert_relative_eq!(
            inclination_correction_dv(std::f64::consts::PI, 3874.0).unwrap(),
            7748.0,
            max_relative = 1e-12
        );
        assert!(inclination_correction_dv(-0.1, 3874.0).is_err());
    }

    #[test]
    fn maneuver_fuel_and_inverse() {
        let b = FuelBudget::default();
        assert_eq!(apply_maneuver(&b, 0.0).unwrap(), b);
        let after = apply_maneuver(&b, 1.0).unwrap();
        assert_relative_eq!(
            b.propellant - after.propellant,
            1.797_991_870_366_422_2,
            max_relative = 1e-9
        );
        let stage = StageSpec::new("sk", b.isp, b.total_mass(), after.total_mass());
        assert_relative_eq!(rocket_dv(&stage).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn running_dry_is_reported() {
        let b = FuelBudget {
            propellant: 1.0,
            ..FuelBudget::default()
        };
        match apply_maneuver(&b, 10.0) {
            Err(Error::FuelDepleted {
                needed_kg,
                available_kg,
            }) => {
                assert!(needed_kg > available_kg);
                assert_eq!(available_kg, 1.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(apply_maneuver(&b, -1.0).is_err());
    }

    #[test]
    fn fifteen_year_schedule_fits_budget() {
        let plan = annual_schedule(15, &SlotSpec::default(), &E).unwrap();
        assert_eq!(plan.len(), 30);
        let out = execute_schedule(&FuelBudget::default(), &plan).unwrap();
        assert_relative_eq!(out.total_dv, 22.47, max_relative = 1e-3);
        assert_relative_eq!(out.propellant_used, 40.20, max_relative = 1e-3);
        assert!(out.propellant_used <= 50.0);
    }

    fn history(delta_a: f64, phase0: f64, days: usize) -> Vec<(f64, KeplerianElements)> {
        let a = A + delta_a;
        let n = mean_motion(a, &E).unwrap();
        (0..=days)
            .map(|d| {
                let t = d as f64 * SECONDS_PER_DAY;
                (
                    t,
                    KeplerianElements::circular(a, 55f64.to_radians(), 0.3, wrap_pi(phase0 - 0.3 + n * t)),
                )
            })
            .collect()
    }

    #[test]
    fn centred_zero_drift_needs_nothing() {
        let r = longitude_drift_monitor(
            &history(0.0, 0.0, 5),
            &SlotSpec::default(),
            &MonitorConfig::default(),
            &E,
        )
        .unwrap();
        assert!(r.offset.abs() < 1e-9 && r.rate.abs() < 1e-15);
        assert!(r.maneuver.is_none() && r.time_to_exit.is_none());
    }

    #[test]
    fn drift_rate_matches_mean_motion_differential() {
        let da = 2_000.0;
        let r = longitude_drift_monitor(
            &history(da, 0.0, 10),
            &SlotSpec::default(),
            &MonitorConfig::default(),
            &E,
        )
        .unwrap();
        let analytic = -1.5 * (da / A) * mean_motion(A, &E).unwrap();
        assert!(r.rate < 0.0);
        assert_relative_eq!(r.rate, analytic, max_relative = 1e-3);
        assert_relative_eq!(r.rate.to_degrees() * SECONDS_PER_DAY, -0.08156, max_relative = 1e-3);
    }

    #[test]
    fn projected_exit_triggers_opposing_trim() {
        // 2 km high drifts ≈ −0.0816°/day; starting at −1.2° it leaves the window in ~10 days
        let r = longitude_drift_monitor(
            &history(2_000.0, -1.2f64.to_radians(), 3),
            &SlotSpec::default(),
            &MonitorConfig::default(),
            &E,
        )
        .unwrap();
        let exit = r.time_to_exit.unwrap() / SECONDS_PER_DAY;
        assert!(exit > 5.0 && exit < 15.0, "{exit}");
        let m = r.maneuver.unwrap();
        assert!(m.rate_change * r.projected_offset < 0.0);
        assert!(m.delta_a < 0.0 && m.dv > 0.0);
    }

    #[test]
    fn short_history_is_an_error() {
        assert!(matches!(
            longitude_drift_monitor(
                &history(0.0, 0.0, 0),
                &SlotSpec::default(),
                &MonitorConfig::default(),
                &E
            ),
            Err(Error::InsufficientData(_))
        ));
    }
}
