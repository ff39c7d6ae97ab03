//! Browser demo: Hohmann ellipse, coverage map and slew curve. Each export
//! returns a JSON string; the plain functions behind them are ordinary Rust
//! so they can be tested natively.

use std::f64::consts::PI;

use gpsim::attitude::{step_attitude, AppliedTorques, InertiaSpec, RigidBodyState, WheelSpec};
use gpsim::constellation::{coverage_sweep, ConstellationSpec, CoverageConfig};
use gpsim::control::{attitude_error, pd_torque, PidGains};
use gpsim::transfer::hohmann_plan;
use gpsim::{BodyConstants, Error, UnitQuaternion, Vec3};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize)]
pub struct EllipseView {
    pub a_transfer_km: f64,
    pub e_transfer: f64,
    pub dv1_mps: f64,
    pub dv2_mps: f64,
    pub time_of_flight_h: f64,
    /// Polylines in km, focus at the origin, departure on +x.
    pub initial: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
    pub transfer: Vec<[f64; 2]>,
}

fn circle(r: f64, n: usize) -> Vec<[f64; 2]> {
    (0..=n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

pub fn hohmann_ellipse(r1_km: f64, r2_km: f64, points: usize) -> Result<EllipseView, Error> {
    let body = BodyConstants::default();
    let plan = hohmann_plan(r1_km * 1e3, r2_km * 1e3, &body)?;
    let n = points.clamp(8, 4096);
    let a = plan.a_transfer / 1e3;
    let e = plan.e_transfer;
    let p = a * (1.0 - e * e);
    // raising starts at periapsis, lowering at apoapsis
    let sign = if r2_km >= r1_km { 1.0 } else { -1.0 };
    let transfer = (0..=n)
        .map(|k| {
            let th = PI * k as f64 / n as f64;
            let r = p / (1.0 + sign * e * th.cos());
            [r * th.cos(), r * th.sin()]
        })
        .collect();
    Ok(EllipseView {
        a_transfer_km: a,
        e_transfer: e,
        dv1_mps: plan.dv1,
        dv2_mps: plan.dv2,
        time_of_flight_h: plan.time_of_flight / 3600.0,
        initial: circle(r1_km, n),
        target: circle(r2_km, n),
        transfer,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageView {
    pub lat_deg: Vec<f64>,
    pub lon_deg: Vec<f64>,
    /// `min_visible[i][j]` at `lat_deg[i]`, `lon_deg[j]`.
    pub min_visible: Vec<Vec<usize>>,
    pub global_min: usize,
    pub worst_lat_deg: f64,
    pub worst_lon_deg: f64,
}

pub fn coverage_map(planes: u32, sats_per_plane: u32, mask_deg: f64, grid_deg: f64) -> Result<CoverageView, Error> {
    let body = BodyConstants::default();
    let spec = ConstellationSpec::even(planes, sats_per_plane, 55f64.to_radians(), 26_560e3);
    let cfg = CoverageConfig {
        lat_step: grid_deg.to_radians(),
        lon_step: grid_deg.to_radians(),
        elevation_mask: mask_deg.to_radians(),
        ..CoverageConfig::default()
    };
    let map = coverage_sweep(&spec, &cfg, &body)?;
    let deg = |x: f64| (x.to_degrees() * 1e6).round() / 1e6;
    let mut lat_deg: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for c in &map.cells {
        let lat = deg(c.latitude);
        if lat_deg.last() != Some(&lat) {
            lat_deg.push(lat);
            rows.push(Vec::new());
        }
        rows.last_mut().expect("row exists").push(c.min_visible);
    }
    let lon_deg = map.cells[..rows[0].len()].iter().map(|c| deg(c.longitude)).collect();
    let w = map.worst();
    Ok(CoverageView {
        lat_deg,
        lon_deg,
        min_visible: rows,
        global_min: map.global_min,
        worst_lat_deg: deg(w.latitude),
        worst_lon_deg: deg(w.longitude),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlewView {
    pub t: Vec<f64>,
    /// Simulated pointing error with wheel limits (deg).
    pub angle_deg: Vec<f64>,
    /// Unconstrained linear second-order response (deg).
    pub ideal_deg: Vec<f64>,
    /// Delivered wheel torque magnitude (N·m).
    pub wheel_torque: Vec<f64>,
    /// First time after which the error stays below 2% of the start.
    pub settle_time_s: Option<f64>,
    pub peak_overshoot_deg: f64,
}

/// Free response of `x'' + 2ζωx' + ω²x = 0` from rest at `x0`.
pub fn second_order_response(x0: f64, omega_n: f64, zeta: f64, t: f64) -> f64 {
    let w = omega_n;
    if (zeta - 1.0).abs() < 1e-9 {
        x0 * (1.0 + w * t) * (-w * t).exp()
    } else if zeta < 1.0 {
        let wd = w * (1.0 - zeta * zeta).sqrt();
        x0 * (-zeta * w * t).exp() * ((wd * t).cos() + zeta * w / wd * (wd * t).sin())
    } else {
        let r = (zeta * zeta - 1.0).sqrt();
        let (s1, s2) = (-w * (zeta - r), -w * (zeta + r));
        x0 * (s2 * (s1 * t).exp() - s1 * (s2 * t).exp()) / (s2 - s1)
    }
}

/// PD slew about the body y axis of the default spacecraft.
pub fn slew_curve(
    angle_deg: f64,
    omega_n: f64,
    zeta: f64,
    max_wheel_torque: f64,
    duration: f64,
) -> Result<SlewView, Error> {
    if !(omega_n > 0.0 && zeta > 0.0 && duration > 0.0 && duration <= 20_000.0) {
        return Err(Error::Domain("need ωn > 0, ζ > 0 and 0 < duration ≤ 20000 s".into()));
    }
    let inertia = InertiaSpec::diagonal(1200.0, 1000.0, 800.0)?;
    let wheels = WheelSpec {
        max_torque: max_wheel_torque,
        ..WheelSpec::default()
    };
    wheels.validate()?;
    let gains = PidGains::from_bandwidth(&inertia, omega_n, zeta, 0.0).without_integral();
    let dt = 0.1;
    let every = 10;
    let steps = (duration / dt).round() as usize;
    let target = UnitQuaternion::IDENTITY;
    let mut state = RigidBodyState::at_rest(UnitQuaternion::from_axis_angle(&Vec3::y(), angle_deg.to_radians()));

    let mut v = SlewView {
        t: Vec::new(),
        angle_deg: Vec::new(),
        ideal_deg: Vec::new(),
        wheel_torque: Vec::new(),
        settle_time_s: None,
        peak_overshoot_deg: 0.0,
    };
    let band = 0.02 * angle_deg.abs();
    for k in 0..=steps {
        let e = attitude_error(state.q, target);
        let u = pd_torque(&e, &state.omega, &gains);
        let torques = AppliedTorques {
            external: Vec3::zeros(),
            wheel_command: -u,
        };
        let step = step_attitude(&state, &inertia, &wheels, &torques, dt)?;
        let t = k as f64 * dt;
        // signed error about the slew axis
        let err = e.y.to_degrees();
        if err.abs() > band {
            v.settle_time_s = None;
        } else if v.settle_time_s.is_none() {
            v.settle_time_s = Some(t);
        }
        if err * angle_deg < 0.0 {
            v.peak_overshoot_deg = v.peak_overshoot_deg.max(err.abs());
        }
        if k % every == 0 {
            v.t.push(t);
            v.angle_deg.push(err);
            v.ideal_deg.push(second_order_response(angle_deg, omega_n, zeta, t));
            v.wheel_torque.push(step.wheel_torque.norm());
        }
        state = step.state;
    }
    Ok(v)
}

fn to_json<T: Serialize>(r: Result<T, Error>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&format!("{} ({})", e, e.kind())))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = hohmannEllipse)]
pub fn hohmann_ellipse_js(r1_km: f64, r2_km: f64, points: usize) -> Result<String, JsError> {
    to_json(hohmann_ellipse(r1_km, r2_km, points))
}

#[wasm_bindgen(js_name = coverageMap)]
pub fn coverage_map_js(planes: u32, sats_per_plane: u32, mask_deg: f64, grid_deg: f64) -> Result<String, JsError> {
    to_json(coverage_map(planes, sats_per_plane, mask_deg, grid_deg))
}

#[wasm_bindgen(js_name = slewCurve)]
pub fn slew_curve_js(
    angle_deg: f64,
    omega_n: f64,
    zeta: f64,
    max_wheel_torque: f64,
    duration: f64,
) -> Result<String, JsError> {
    to_json(slew_curve(angle_deg, omega_n, zeta, max_wheel_torque, duration))
}
