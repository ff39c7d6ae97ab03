//! Launch and insertion planning: rocket equation, staged Δv budget,
//! Hohmann transfer, thruster force, insertion tolerance gate and trim sizing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{deg, wrap_pi};
use crate::orbit::{circular_speed, vis_viva_speed, BodyConstants, KeplerianElements};
use crate::G0;

/// Gravity loss charged against the ascent when the caller has no better figure (m/s).
pub const DEFAULT_GRAVITY_LOSS: f64 = 2_000.0;
/// Δv the launcher must deliver for MEO insertion (m/s).
pub const DEFAULT_REQUIRED_INSERTION_DV: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub label: String,
    /// Specific impulse (s).
    pub isp: f64,
    /// Mass at ignition (kg).
    pub m0: f64,
    /// Mass at burnout (kg).
    pub mf: f64,
}

impl StageSpec {
    pub fn new(label: impl Into<String>, isp: f64, m0: f64, mf: f64) -> Self {
        Self {
            label: label.into(),
            isp,
            m0,
            mf,
        }
    }

    /// A stage sized to deliver `dv` with the given Isp and burnout mass.
    pub fn for_delta_v(label: impl Into<String>, isp: f64, dv: f64, mf: f64) -> Self {
        Self::new(label, isp, mf * (dv / (isp * G0)).exp(), mf)
    }

    pub fn exhaust_velocity(&self) -> f64 {
        self.isp * G0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.isp > 0.0 && self.isp.is_finite()) {
            return Err(Error::domain(format!("stage `{}`: Isp must be positive", self.label)));
        }
        if !(self.mf > 0.0 && self.m0.is_finite()) {
            return Err(Error::domain(format!(
                "stage `{}`: burnout mass must be positive",
                self.label
            )));
        }
        if self.m0 < self.mf {
            return Err(Error::domain(format!(
                "stage `{}`: initial mass {} kg below final mass {} kg",
                self.label, self.m0, self.mf
            )));
        }
        Ok(())
    }
}

/// v_e · ln(m0/mf) with v_e = Isp·g0.
///
/// A stage that burns nothing (`m0 == mf`) delivers zero; `m0 < mf` is rejected.
pub fn rocket_dv(stage: &StageSpec) -> Result<f64> {
    stage.validate()?;
    Ok(stage.exhaust_velocity() * (stage.m0 / stage.mf).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchBudget {
    pub per_stage: Vec<(String, f64)>,
    pub gross_dv: f64,
    pub gravity_loss: f64,
    pub net_dv: f64,
    pub required_dv: f64,
    pub shortfall: bool,
}

pub fn launch_budget(stages: &[StageSpec], gravity_loss: f64, required_dv: f64) -> Result<LaunchBudget> {
    if stages.is_empty() {
        return Err(Error::Configuration("launch budget needs at least one stage".into()));
    }
    if !(gravity_loss >= 0.0) {
        return Err(Error::Configuration("gravity loss must be ≥ 0".into()));
    }
    let per_stage = stages
        .iter()
        .map(|s| rocket_dv(s).map(|dv| (s.label.clone(), dv)))
        .collect::<Result<Vec<_>>>()?;
    let gross_dv: f64 = per_stage.iter().map(|(_, dv)| dv).sum();
    let net_dv = gross_dv - gravity_loss;
    Ok(LaunchBudget {
        per_stage,
        gross_dv,
        gravity_loss,
        net_dv,
        required_dv,
        shortfall: net_dv < required_dv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HohmannPlan {
    pub r1: f64,
    pub r2: f64,
    /// Departure burn (m/s), always ≥ 0.
    pub dv1: f64,
    /// Arrival burn (m/s), always ≥ 0.
    pub dv2: f64,
    pub a_transfer: f64,
    pub e_transfer: f64,
    /// Half the transfer-ellipse period (s).
    pub time_of_flight: f64,
}

impl HohmannPlan {
    pub fn total_dv(&self) -> f64 {
        self.dv1 + self.dv2
    }
}

/// Two-impulse transfer between coplanar circular orbits of radius `r1` and `r2`.
///
/// The burn magnitudes are
/// `dv1 = √(μ/r1)(√(2r2/(r1+r2)) − 1)` and `dv2 = √(μ/r2)(1 − √(2r1/(r1+r2)))`,
/// reported as absolute values so lowering transfers read the same way.
pub fn hohmann_plan(r1: f64, r2: f64, body: &BodyConstants) -> Result<HohmannPlan> {
    if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
        return Err(Error::domain(format!(
            "radii must be positive, got r1 = {r1}, r2 = {r2}"
        )));
    }
    let sum = r1 + r2;
    let v1 = circular_speed(r1, body)?;
    let v2 = circular_speed(r2, body)?;
    let dv1 = v1 * ((2.0 * r2 / sum).sqrt() - 1.0);
    let dv2 = v2 * (1.0 - (2.0 * r1 / sum).sqrt());
    let a_transfer = sum / 2.0;
    Ok(HohmannPlan {
        r1,
        r2,
        dv1: dv1.abs(),
        dv2: dv2.abs(),
        a_transfer,
        e_transfer: (r2 - r1).abs() / sum,
        time_of_flight: PI * (a_transfer.powi(3) / body.mu).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrusterSpec {
    /// Mass flow (kg/s).
    pub mdot: f64,
    /// Effective exhaust velocity (m/s).
    pub ve: f64,
    /// Specific impulse (s); always `ve / g0`.
    pub isp: f64,
}

impl ThrusterSpec {
    pub fn from_isp(mdot: f64, isp: f64) -> Self {
        Self {
            mdot,
            ve: isp * G0,
            isp,
        }
    }

    pub fn from_exhaust_velocity(mdot: f64, ve: f64) -> Self {
        Self { mdot, ve, isp: ve / G0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mdot >= 0.0) {
            return Err(Error::invalid("thruster.mdot", "must be ≥ 0"));
        }
        if !(self.ve > 0.0 && self.ve.is_finite()) {
            return Err(Error::invalid("thruster.ve", "must be positive"));
        }
        if (self.ve - self.isp * G0).abs() > 1e-9 * self.ve {
            return Err(Error::invalid("thruster.isp", "inconsistent with ve = isp·g0"));
        }
        Ok(())
    }
}

/// F = ṁ · v_e.
pub fn thrust(spec: &ThrusterSpec) -> f64 {
    spec.mdot * spec.ve
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsertionTolerances {
    /// Allowed |Δa| (m).
    pub sma_tol: f64,
    /// Maximum eccentricity.
    pub ecc_max: f64,
    /// Allowed |Δi| (rad).
    pub inc_tol: f64,
}

impl Default for InsertionTolerances {
    fn default() -> Self {
        Self {
            sma_tol: 1_000.0,
            ecc_max: 0.005,
            inc_tol: deg(0.1),
        }
    }
}

impl InsertionTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tolerances.sma_tol", self.sma_tol),
            ("tolerances.ecc_max", self.ecc_max),
            ("tolerances.inc_tol", self.inc_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCheck {
    pub deviation: f64,
    pub limit: f64,
    pub pass: bool,
}

impl ChannelCheck {
    fn new(deviation: f64, limit: f64) -> Self {
        Self {
            deviation,
            limit,
            pass: deviation.abs() <= limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionReport {
    /// a − a_target (m).
    pub sma: ChannelCheck,
    /// Achieved eccentricity against the ceiling.
    pub ecc: ChannelCheck,
    /// i − i_target (rad).
    pub inc: ChannelCheck,
    pub pass: bool,
}

/// Single-epoch osculating comparison against the insertion tolerances.
pub fn check_insertion(
    el: &KeplerianElements,
    target: &KeplerianElements,
    tol: &InsertionTolerances,
) -> InsertionReport {
    let sma = ChannelCheck::new(el.a - target.a, tol.sma_tol);
    let ecc = ChannelCheck::new(el.e, tol.ecc_max);
    let inc = ChannelCheck::new(el.i - target.i, tol.inc_tol);
    InsertionReport {
        sma,
        ecc,
        inc,
        pass: sma.pass && ecc.pass && inc.pass,
    }
}

/// Bounds of the first-order trim model.
///
/// Each linearized channel formula stays within about one percent of the exact
/// two-impulse cost inside these limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrimRegime {
    /// Largest |Δa| / a.
    pub max_relative_sma: f64,
    pub max_ecc_change: f64,
    /// Largest |Δi| (rad).
    pub max_inc_change: f64,
}

impl Default for TrimRegime {
    fn default() -> Self {
        Self {
            max_relative_sma: 0.01,
            max_ecc_change: 0.05,
            max_inc_change: deg(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrimEstimate {
    pub sma_dv: f64,
    pub inc_dv: f64,
    pub ecc_dv: f64,
    pub total_dv: f64,
}

/// Linearized Δv to remove the residual (a, e, i) error after insertion:
/// `|Δa|·v/(2a)`, `2v·sin(|Δi|/2)` and `v·|Δe|/2`, evaluated at the target's
/// circular speed.
pub fn trim_dv_estimate(
    el: &KeplerianElements,
    target: &KeplerianElements,
    body: &BodyConstants,
    regime: &TrimRegime,
) -> Result<TrimEstimate> {
    let v = circular_speed(target.a, body)?;
    let da = (el.a - target.a).abs();
    let de = (el.e - target.e).abs();
    let di = wrap_pi(el.i - target.i).abs();
    if da / target.a > regime.max_relative_sma {
        return Err(Error::OutOfRange(format!(
            "|Δa| = {:.1} km exceeds {:.1} km",
            da / 1e3,
            regime.max_relative_sma * target.a / 1e3
        )));
    }
    if de > regime.max_ecc_change {
        return Err(Error::OutOfRange(format!(
            "|Δe| = {de:.4} exceeds {}",
            regime.max_ecc_change
        )));
    }
    if di > regime.max_inc_change {
        return Err(Error::OutOfRange(format!(
            "|Δi| = {:.3}° exceeds {:.3}°",
            di.to_degrees(),
            regime.max_inc_change.to_degrees()
        )));
    }
    let sma_dv = da * v / (2.0 * target.a);
    let inc_dv = 2.0 * v * (di / 2.0).sin();
    let ecc_dv = v * de / 2.0;
    Ok(TrimEstimate {
        sma_dv,
        inc_dv,
        ecc_dv,
        total_dv: sma_dv + inc_dv + ecc_dv,
    })
}

/// Speeds at perigee and apogee of the transfer ellipse, for diagnostics.
pub fn transfer_apsis_speeds(plan: &HohmannPlan, body: &BodyConstants) -> Result<(f64, f64)> {
    Ok((
        vis_viva_speed(plan.r1, plan.a_transfer, body)?,
        vis_viva_speed(plan.r2, plan.a_transfer, body)?,
    ))
}
