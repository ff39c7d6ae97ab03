//! Walker-style constellation geometry and ground coverage.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{wrap_two_pi, Vec3};
use crate::orbit::{
    elements_to_state, orbital_period, propagate_with, BodyConstants, KeplerianElements, PerturbationConfig,
    StateVector, EARTH_ROTATION_RATE,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstellationSpec {
    pub num_planes: u32,
    pub sats_per_plane: u32,
    pub inclination: f64,
    pub semi_major_axis: f64,
    pub raan_spacing: f64,
    /// Along-track phase added per plane (rad).
    pub phase_offset_between_planes: f64,
}

impl Default for ConstellationSpec {
    fn default() -> Self {
        Self::even(6, 4, 55f64.to_radians(), 26_560e3)
    }
}

impl ConstellationSpec {
    /// Evenly spaced planes with even global phasing (2π/(P·S) per plane).
    pub fn even(num_planes: u32, sats_per_plane: u32, inclination: f64, semi_major_axis: f64) -> Self {
        let p = num_planes.max(1) as f64;
        let total = (num_planes.max(1) * sats_per_plane.max(1)) as f64;
        Self {
            num_planes,
            sats_per_plane,
            inclination,
            semi_major_axis,
            raan_spacing: TAU / p,
            phase_offset_between_planes: TAU / total,
        }
    }

    pub fn total(&self) -> usize {
        self.num_planes as usize * self.sats_per_plane as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_planes < 1 {
            return Err(Error::invalid("constellation.num_planes", "must be ≥ 1"));
        }
        if self.sats_per_plane < 1 {
            return Err(Error::invalid("constellation.sats_per_plane", "must be ≥ 1"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.inclination) {
            return Err(Error::invalid("constellation.inclination", "must lie in [0, π]"));
        }
        if !(self.semi_major_axis > 0.0 && self.semi_major_axis.is_finite()) {
            return Err(Error::invalid("constellation.semi_major_axis", "must be positive"));
        }
        if !self.raan_spacing.is_finite() || self.raan_spacing < 0.0 {
            return Err(Error::invalid("constellation.raan_spacing", "must be ≥ 0"));
        }
        if !self.phase_offset_between_planes.is_finite() {
            return Err(Error::invalid(
                "constellation.phase_offset_between_planes",
                "must be finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub latitude: f64,
    /// Earth-fixed longitude (rad).
    pub longitude: f64,
    pub elevation_mask: f64,
}

impl GroundPoint {
    pub fn new(latitude: f64, longitude: f64, elevation_mask: f64) -> Result<Self> {
        if !(latitude.abs() <= FRAC_PI_2) {
            return Err(Error::invalid("ground_point.latitude", "must satisfy |lat| ≤ π/2"));
        }
        if !longitude.is_finite() || !elevation_mask.is_finite() {
            return Err(Error::invalid("ground_point.longitude", "must be finite"));
        }
        Ok(Self {
            latitude,
            longitude,
            elevation_mask,
        })
    }

    /// Inertial position on a spherical Earth rotated by `earth_rotation_angle`.
    pub fn inertial_position(&self, earth_rotation_angle: f64, body: &BodyConstants) -> Vec3 {
        let lon = self.longitude + earth_rotation_angle;
        let c = self.latitude.cos();
        Vec3::new(c * lon.cos(), c * lon.sin(), self.latitude.sin()) * body.re
    }
}

pub fn build_constellation(spec: &ConstellationSpec) -> Result<Vec<KeplerianElements>> {
    spec.validate()?;
    let s = spec.sats_per_plane as f64;
    let mut out = Vec::with_capacity(spec.total());
    for p in 0..spec.num_planes {
        let raan = wrap_two_pi(p as f64 * spec.raan_spacing);
        for k in 0..spec.sats_per_plane {
            let u = wrap_two_pi(k as f64 * TAU / s + p as f64 * spec.phase_offset_between_planes);
            out.push(KeplerianElements::circular(
                spec.semi_major_axis,
                spec.inclination,
                raan,
                u,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visibility {
    pub count: usize,
    /// Elevation of each satellite above the local horizon (rad).
    pub elevations: Vec<f64>,
}

pub fn elevation(ground: &Vec3, satellite: &Vec3) -> f64 {
    let up = ground.normalize();
    let los = satellite - ground;
    (los.dot(&up) / los.norm()).clamp(-1.0, 1.0).asin()
}

pub fn visible_count(
    point: &GroundPoint,
    sat_states: &[StateVector],
    earth_rotation_angle: f64,
    body: &BodyConstants,
) -> Visibility {
    let g = point.inertial_position(earth_rotation_angle, body);
    let elevations: Vec<f64> = sat_states.iter().map(|s| elevation(&g, &s.position)).collect();
    let count = elevations.iter().filter(|&&e| e >= point.elevation_mask).count();
    Visibility { count, elevations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub lat_step: f64,
    pub lon_step: f64,
    /// Sweep length (s); zero means one orbital period.
    pub duration: f64,
    pub step: f64,
    pub elevation_mask: f64,
    /// Earth rotation angle at epoch 0 (rad).
    pub initial_rotation: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            lat_step: 10f64.to_radians(),
            lon_step: 10f64.to_radians(),
            duration: 0.0,
            step: 60.0,
            elevation_mask: 5f64.to_radians(),
            initial_rotation: 0.0,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_step > 0.0 && self.lat_step.is_finite()) {
            return Err(Error::invalid("coverage.lat_step", "must be positive"));
        }
        if !(self.lon_step > 0.0 && self.lon_step.is_finite()) {
            return Err(Error::invalid("coverage.lon_step", "must be positive"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("coverage.step", "must be positive"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("coverage.duration", "must be ≥ 0"));
        }
        if !self.elevation_mask.is_finite() {
            return Err(Error::invalid("coverage.elevation_mask", "must be finite"));
        }
        Ok(())
    }

    /// Grid points: latitudes from −90° to +90° inclusive, longitudes from −180°.
    pub fn grid(&self) -> Vec<GroundPoint> {
        let n_lat = (std::f64::consts::PI / self.lat_step + 1e-9).floor() as usize;
        let n_lon = ((TAU / self.lon_step) - 1e-9).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity((n_lat + 1) * n_lon);
        for i in 0..=n_lat {
            let lat = (-FRAC_PI_2 + i as f64 * self.lat_step).min(FRAC_PI_2);
            for j in 0..n_lon {
                out.push(GroundPoint {
                    latitude: lat,
                    longitude: -std::f64::consts::PI + j as f64 * self.lon_step,
                    elevation_mask: self.elevation_mask,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub latitude: f64,
    pub longitude: f64,
    pub min_visible: usize,
    /// Epoch at which the minimum first occurred (s).
    pub worst_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub cells: Vec<CoverageCell>,
    pub global_min: usize,
    pub worst_cell: usize,
    pub epochs: usize,
}

impl CoverageMap {
    pub fn worst(&self) -> &CoverageCell {
        &self.cells[self.worst_cell]
    }

    /// `lat_deg,lon_deg,min_visible` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lat_deg,lon_deg,min_visible\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:.6},{:.6},{}",
                c.latitude.to_degrees(),
                c.longitude.to_degrees(),
                c.min_visible
            );
        }
        s
    }
}

/// Satellite positions at every sample epoch, by RK4 two-body propagation
/// at the sample step.
fn sample_positions(
    spec: &ConstellationSpec,
    duration: f64,
    step: f64,
    body: &BodyConstants,
) -> Result<Vec<Vec<StateVector>>> {
    let els = build_constellation(spec)?;
    let n_samples = (duration / step + 1e-9).floor() as usize + 1;
    let mut per_epoch: Vec<Vec<StateVector>> = vec![Vec::with_capacity(els.len()); n_samples];
    let cfg = PerturbationConfig::two_body();
    for el in &els {
        let sv0 = elements_to_state(el, body)?;
        per_epoch[0].push(sv0);
        let mut k = 1;
        propagate_with(&sv0, (n_samples - 1) as f64 * step, step, &cfg, body, |s| {
            if k < n_samples {
                per_epoch[k].push(*s);
            }
            k += 1;
        })?;
    }
    Ok(per_epoch)
}

fn sweep_cell(
    point: &GroundPoint,
    samples: &[Vec<StateVector>],
    cfg: &CoverageConfig,
    body: &BodyConstants,
) -> CoverageCell {
    let mut min_visible = usize::MAX;
    let mut worst_epoch = 0.0;
    for (k, states) in samples.iter().enumerate() {
        let t = k as f64 * cfg.step;
        let theta = cfg.initial_rotation + EARTH_ROTATION_RATE * t;
        let n = visible_count(point, states, theta, body).count;
        if n < min_visible {
            min_visible = n;
            worst_epoch = t;
        }
    }
    CoverageCell {
        latitude: point.latitude,
        longitude: point.longitude,
        min_visible,
        worst_epoch,
    }
}

/// Minimum number of satellites in view at each grid point over the sweep.
/// Cells are independent; results keep grid order regardless of threading.
pub fn coverage_sweep(spec: &ConstellationSpec, cfg: &CoverageConfig, body: &BodyConstants) -> Result<CoverageMap> {
    cfg.validate()?;
    let duration = if cfg.duration > 0.0 {
        cfg.duration
    } else {
        orbital_period(spec.semi_major_axis, body)?
    };
    let samples = sample_positions(spec, duration, cfg.step, body)?;
    let grid = cfg.grid();

    #[cfg(feature = "parallel")]
    let cells: Vec<CoverageCell> = {
        use rayon::prelude::*;
        grid.par_iter().map(|p| sweep_cell(p, &samples, cfg, body)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<CoverageCell> = grid.iter().map(|p| sweep_cell(p, &samples, cfg, body)).collect();

    let (worst_cell, global_min) = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.min_visible))
        .min_by_key(|&(i, m)| (m, i))
        .expect("grid is never empty");
    Ok(CoverageMap {
        cells,
        global_min,
        worst_cell,
        epochs: samples.len(),
    })
}
