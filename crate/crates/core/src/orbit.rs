//! Two-body and perturbed orbital mechanics.
//!
//! Frames: a single Earth-centred inertial frame with the equator in the
//! x–y plane. Elements are osculating; angles are radians in [0, 2π).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_finite_vec, rk4_step, wrap_two_pi, Vec3};

/// Sidereal rotation rate of the Earth (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

const ECC_EPS: f64 = 1e-11;
const INC_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyConstants {
    /// Gravitational parameter μ (m³/s²).
    pub mu: f64,
    /// Equatorial radius (m).
    pub re: f64,
    pub j2: f64,
}

impl Default for BodyConstants {
    fn default() -> Self {
        Self::EARTH
    }
}

impl BodyConstants {
    pub const EARTH: Self = Self {
        mu: 3.986e14,
        re: 6.378e6,
        j2: 1.0826e-3,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("body.mu", "must be positive"));
        }
        if !(self.re > 0.0 && self.re.is_finite()) {
            return Err(Error::invalid("body.re", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.j2) {
            return Err(Error::invalid("body.j2", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Seconds since scenario start.
    pub epoch: f64,
}

impl StateVector {
    pub fn new(position: Vec3, velocity: Vec3, epoch: f64) -> Self {
        Self {
            position,
            velocity,
            epoch,
        }
    }

    pub fn radius(&self) -> f64 {
        self.position.norm()
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Specific orbital energy v²/2 − μ/r (two-body).
    pub fn specific_energy(&self, body: &BodyConstants) -> f64 {
        0.5 * self.velocity.norm_squared() - body.mu / self.radius()
    }

    pub fn angular_momentum(&self) -> Vec3 {
        self.position.cross(&self.velocity)
    }

    fn to_array(self) -> [f64; 6] {
        let (r, v) = (self.position, self.velocity);
        [r.x, r.y, r.z, v.x, v.y, v.z]
    }

    fn from_array(x: &[f64; 6], epoch: f64) -> Self {
        Self::new(Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]), epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    /// Semi-major axis (m).
    pub a: f64,
    pub e: f64,
    /// Inclination (rad).
    pub i: f64,
    /// Right ascension of the ascending node (rad).
    pub raan: f64,
    /// Argument of periapsis (rad).
    pub argp: f64,
    pub true_anomaly: f64,
}

impl KeplerianElements {
    pub fn circular(a: f64, i: f64, raan: f64, arg_latitude: f64) -> Self {
        Self {
            a,
            e: 0.0,
            i,
            raan: wrap_two_pi(raan),
            argp: 0.0,
            true_anomaly: wrap_two_pi(arg_latitude),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::UnsupportedOrbit(format!(
                "semi-major axis must be positive, got {}",
                self.a
            )));
        }
        if !(0.0..1.0).contains(&self.e) {
            return Err(Error::UnsupportedOrbit(format!(
                "eccentricity {} is not elliptical",
                self.e
            )));
        }
        if !(0.0..=PI).contains(&self.i) {
            return Err(Error::UnsupportedOrbit(format!(
                "inclination {} outside [0, π]",
                self.i
            )));
        }
        Ok(())
    }

    /// Argument of latitude u = ω + ν.
    pub fn arg_latitude(&self) -> f64 {
        wrap_two_pi(self.argp + self.true_anomaly)
    }

    /// True longitude Ω + ω + ν.
    pub fn true_longitude(&self) -> f64 {
        wrap_two_pi(self.raan + self.argp + self.true_anomaly)
    }

    pub fn mean_anomaly(&self) -> f64 {
        let e = self.e;
        let ecc_anom = 2.0
            * ((1.0 - e).sqrt() * (self.true_anomaly / 2.0).sin())
                .atan2((1.0 + e).sqrt() * (self.true_anomaly / 2.0).cos());
        wrap_two_pi(ecc_anom - e * ecc_anom.sin())
    }

    pub fn periapsis_radius(&self) -> f64 {
        self.a * (1.0 - self.e)
    }

    pub fn apoapsis_radius(&self) -> f64 {
        self.a * (1.0 + self.e)
    }
}

/// Perturbing accelerations added to the central term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub enable_j2: bool,
    /// Constant-magnitude anti-solar acceleration (m/s²).
    pub srp_accel: f64,
    /// Peak magnitude of the lunisolar tidal proxy (m/s²).
    pub lunisolar_accel: f64,
    /// Inertial direction to the Sun (need not be unit); also the tidal axis.
    /// The default sits 30° off the default 55° orbit plane, away from the
    /// noon/midnight yaw singularity of sun-steered nadir pointing.
    pub sun_direction: Vec3,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            enable_j2: true,
            srp_accel: 1e-7,
            lunisolar_accel: 1e-6,
            sun_direction: Vec3::new(1.0, -0.5, 0.3),
        }
    }
}

impl PerturbationConfig {
    pub fn two_body() -> Self {
        Self {
            enable_j2: false,
            srp_accel: 0.0,
            lunisolar_accel: 0.0,
            ..Self::default()
        }
    }

    pub fn j2_only() -> Self {
        Self {
            enable_j2: true,
            ..Self::two_body()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.srp_accel >= 0.0 && self.srp_accel.is_finite()) {
            return Err(Error::invalid("perturbations.srp_accel", "must be ≥ 0"));
        }
        if !(self.lunisolar_accel >= 0.0 && self.lunisolar_accel.is_finite()) {
            return Err(Error::invalid("perturbations.lunisolar_accel", "must be ≥ 0"));
        }
        if !(self.sun_direction.norm() > 0.0 && is_finite_vec(&self.sun_direction)) {
            return Err(Error::invalid(
                "perturbations.sun_direction",
                "must be a non-zero vector",
            ));
        }
        Ok(())
    }
}

fn check_sma(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("semi-major axis must be positive, got {a}")))
    }
}

/// √(μ/a).
pub fn circular_speed(a: f64, body: &BodyConstants) -> Result<f64> {
    check_sma(a)?;
    Ok((body.mu / a).sqrt())
}

/// 2π√(a³/μ).
pub fn orbital_period(a: f64, body: &BodyConstants) -> Result<f64> {
    check_sma(a)?;
    Ok(TAU * (a.powi(3) / body.mu).sqrt())
}

pub fn mean_motion(a: f64, body: &BodyConstants) -> Result<f64> {
    check_sma(a)?;
    Ok((body.mu / a.powi(3)).sqrt())
}

/// Speed on an orbit of semi-major axis `a` at radius `r`.
pub fn vis_viva_speed(r: f64, a: f64, body: &BodyConstants) -> Result<f64> {
    let s = body.mu * (2.0 / r - 1.0 / a);
    if r > 0.0 && a > 0.0 && s >= 0.0 {
        Ok(s.sqrt())
    } else {
        Err(Error::domain(format!("no elliptic speed at r = {r}, a = {a}")))
    }
}

/// Secular J2 regression of the ascending node (rad/s).
///
/// −(3/2) J2 √μ Re² a^(−7/2) (1 − e²)^(−2) cos i
pub fn j2_nodal_rate(a: f64, e: f64, i: f64, body: &BodyConstants) -> Result<f64> {
    check_sma(a)?;
    if !(0.0..1.0).contains(&e) {
        return Err(Error::UnsupportedOrbit(format!("eccentricity {e} is not elliptical")));
    }
    let q = (1.0 - e * e).powi(2);
    Ok(-1.5 * body.j2 * body.mu.sqrt() * body.re.powi(2) * a.powf(-3.5) / q * i.cos())
}

/// Secular J2 rates of (Ω, ω, M) for mean elements, in rad/s. The mean
/// anomaly rate includes the Keplerian mean motion.
pub fn j2_secular_rates(a: f64, e: f64, i: f64, body: &BodyConstants) -> Result<[f64; 3]> {
    let n = mean_motion(a, body)?;
    let raan = j2_nodal_rate(a, e, i, body)?;
    let p = a * (1.0 - e * e);
    let k = body.j2 * (body.re / p).powi(2);
    let c2 = i.cos().powi(2);
    let argp = 0.75 * n * k * (5.0 * c2 - 1.0);
    let mean = n * (1.0 + 0.75 * k * (1.0 - e * e).sqrt() * (3.0 * c2 - 1.0));
    Ok([raan, argp, mean])
}

pub fn elements_to_state(el: &KeplerianElements, body: &BodyConstants) -> Result<StateVector> {
    el.validate()?;
    let p = el.a * (1.0 - el.e * el.e);
    let (sn, cn) = el.true_anomaly.sin_cos();
    let r = p / (1.0 + el.e * cn);
    let r_pf = Vec3::new(r * cn, r * sn, 0.0);
    let vs = (body.mu / p).sqrt();
    let v_pf = Vec3::new(-vs * sn, vs * (el.e + cn), 0.0);

    let (so, co) = el.raan.sin_cos();
    let (si, ci) = el.i.sin_cos();
    let (sw, cw) = el.argp.sin_cos();
    // columns: perifocal P, Q, W axes in the inertial frame
    let p_hat = Vec3::new(co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si);
    let q_hat = Vec3::new(-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si);
    Ok(StateVector::new(
        p_hat * r_pf.x + q_hat * r_pf.y,
        p_hat * v_pf.x + q_hat * v_pf.y,
        0.0,
    ))
}

/// Osculating elements of a bound state.
///
/// Singular cases: for a circular orbit `argp = 0` and the anomaly is the
/// argument of latitude; for an equatorial orbit `raan = 0` and `argp` is the
/// longitude of periapsis; for both, the anomaly is the true longitude.
pub fn state_to_elements(sv: &StateVector, body: &BodyConstants) -> Result<KeplerianElements> {
    let r_vec = sv.position;
    let v_vec = sv.velocity;
    let r = r_vec.norm();
    let v = v_vec.norm();
    if !(r > 0.0 && v > 0.0) || !is_finite_vec(&r_vec) || !is_finite_vec(&v_vec) {
        return Err(Error::UnsupportedOrbit("degenerate state vector".into()));
    }
    let mu = body.mu;
    let h_vec = r_vec.cross(&v_vec);
    let h = h_vec.norm();
    if h <= 1e-12 * r * v {
        return Err(Error::UnsupportedOrbit("rectilinear trajectory".into()));
    }
    let energy = 0.5 * v * v - mu / r;
    if energy >= 0.0 {
        return Err(Error::UnsupportedOrbit(
            "unbound (parabolic or hyperbolic) state".into(),
        ));
    }
    let a = -mu / (2.0 * energy);
    let e_vec = ((v * v - mu / r) * r_vec - r_vec.dot(&v_vec) * v_vec) / mu;
    let e = e_vec.norm();
    if e >= 1.0 {
        return Err(Error::UnsupportedOrbit(format!("eccentricity {e} is not elliptical")));
    }
    let i = (h_vec.z / h).clamp(-1.0, 1.0).acos();
    let node = Vec3::z().cross(&h_vec);
    let n = node.norm();
    let equatorial = n <= INC_EPS * h;
    let circular = e <= ECC_EPS;

    let (raan, argp, nu) = match (equatorial, circular) {
        (false, false) => {
            let raan = node.y.atan2(node.x);
            let mut argp = (node.dot(&e_vec) / (n * e)).clamp(-1.0, 1.0).acos();
            if e_vec.z < 0.0 {
                argp = TAU - argp;
            }
            (raan, argp, anomaly_from(&e_vec, e, &r_vec, r, &v_vec))
        }
        (false, true) => {
            let raan = node.y.atan2(node.x);
            let mut u = (node.dot(&r_vec) / (n * r)).clamp(-1.0, 1.0).acos();
            if r_vec.z < 0.0 {
                u = TAU - u;
            }
            (raan, 0.0, u)
        }
        (true, false) => {
            let mut lon_peri = e_vec.y.atan2(e_vec.x);
            if h_vec.z < 0.0 {
                lon_peri = -lon_peri;
            }
            (0.0, lon_peri, anomaly_from(&e_vec, e, &r_vec, r, &v_vec))
        }
        (true, true) => {
            let mut lon = r_vec.y.atan2(r_vec.x);
            if h_vec.z < 0.0 {
                lon = -lon;
            }
            (0.0, 0.0, lon)
        }
    };

    Ok(KeplerianElements {
        a,
        e,
        i,
        raan: wrap_two_pi(raan),
        argp: wrap_two_pi(argp),
        true_anomaly: wrap_two_pi(nu),
    })
}

fn anomaly_from(e_vec: &Vec3, e: f64, r_vec: &Vec3, r: f64, v_vec: &Vec3) -> f64 {
    let nu = (e_vec.dot(r_vec) / (e * r)).clamp(-1.0, 1.0).acos();
    if r_vec.dot(v_vec) < 0.0 {
        TAU - nu
    } else {
        nu
    }
}

/// Total acceleration: central term plus enabled perturbations.
///
/// * J2: gradient of the zonal oblateness potential.
/// * SRP: `srp_accel` along −ŝ.
/// * Lunisolar proxy: tidal pattern `½·lunisolar_accel·(3(r̂·ŝ)ŝ − r̂)` about the
///   Sun line, so its magnitude never exceeds `lunisolar_accel`.
pub fn acceleration(
    sv: &StateVector,
    cfg: &PerturbationConfig,
    body: &BodyConstants,
    sun_direction: &Vec3,
) -> Result<Vec3> {
    let r_vec = sv.position;
    let r2 = r_vec.norm_squared();
    if r2 == 0.0 {
        return Err(Error::Singularity("acceleration evaluated at the origin".into()));
    }
    let r = r2.sqrt();
    let mut acc = -body.mu / (r2 * r) * r_vec;

    if cfg.enable_j2 && body.j2 != 0.0 {
        let k = -1.5 * body.j2 * body.mu * body.re.powi(2) / r.powi(5);
        let z2 = r_vec.z * r_vec.z / r2;
        acc += Vec3::new(
            k * r_vec.x * (1.0 - 5.0 * z2),
            k * r_vec.y * (1.0 - 5.0 * z2),
            k * r_vec.z * (3.0 - 5.0 * z2),
        );
    }
    if cfg.srp_accel > 0.0 || cfg.lunisolar_accel > 0.0 {
        let s = sun_direction
            .try_normalize(0.0)
            .ok_or_else(|| Error::Configuration("sun direction must be non-zero".into()))?;
        acc -= cfg.srp_accel * s;
        if cfg.lunisolar_accel > 0.0 {
            let rh = r_vec / r;
            acc += 0.5 * cfg.lunisolar_accel * (3.0 * rh.dot(&s) * s - rh);
        }
    }
    Ok(acc)
}

/// Integrates the perturbed equations of motion for `dt` seconds, calling
/// `observe` on every intermediate state (including the final one).
pub fn propagate_with<F: FnMut(&StateVector)>(
    sv: &StateVector,
    dt: f64,
    step: f64,
    cfg: &PerturbationConfig,
    body: &BodyConstants,
    mut observe: F,
) -> Result<StateVector> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("propagation span must be ≥ 0, got {dt}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    let sun = cfg.sun_direction;
    let rhs = |_t: f64, x: &[f64; 6]| -> [f64; 6] {
        let s = StateVector::from_array(x, 0.0);
        match acceleration(&s, cfg, body, &sun) {
            Ok(a) => [x[3], x[4], x[5], a.x, a.y, a.z],
            Err(_) => [f64::NAN; 6],
        }
    };

    let t0 = sv.epoch;
    let n_full = (dt / step).floor() as u64;
    let remainder = dt - n_full as f64 * step;
    let mut x = sv.to_array();
    let mut current = *sv;
    let advance = |h: f64, t_end: f64, x: &mut [f64; 6]| -> Result<StateVector> {
        *x = rk4_step(rhs, x, t_end - h, h)?;
        let s = StateVector::from_array(x, t_end);
        if s.radius() <= body.re {
            return Err(Error::Impact { t: t_end });
        }
        Ok(s)
    };
    for k in 1..=n_full {
        current = advance(step, t0 + k as f64 * step, &mut x)?;
        observe(&current);
    }
    // skip sub-nanosecond remainders left by floating-point division
    if remainder > 1e-9 * step {
        current = advance(remainder, t0 + dt, &mut x)?;
        observe(&current);
    } else {
        current.epoch = t0 + dt;
    }
    Ok(current)
}

/// RK4 propagation of the perturbed equations of motion.
pub fn propagate(
    sv: &StateVector,
    dt: f64,
    step: f64,
    cfg: &PerturbationConfig,
    body: &BodyConstants,
) -> Result<StateVector> {
    propagate_with(sv, dt, step, cfg, body, |_| {})
}
