//! Attitude control laws, gain synthesis and the mode supervisor.
//!
//! Torques returned here act on the body. The wheels deliver a body torque
//! `u` when commanded with `−u` (see [`crate::attitude::euler_rhs`]).

mod lqr;
mod mode;

pub use lqr::{care_residual, lqr_gain, LqrGain, LqrSpec};
pub use mode::{mode_supervisor, ControlMode, GroundCommand, ModeKind, SupervisorConfig, SupervisorInput};

use serde::{Deserialize, Serialize};

use crate::attitude::{InertiaSpec, MagnetorquerSpec, ThrusterTorqueSpec};
use crate::error::{Error, Result};
use crate::math::{is_finite_vec, Mat3, UnitQuaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
    /// Per-axis clamp on the error integral (rad·s).
    pub integrator_limit: f64,
}

impl PidGains {
    /// Per-axis second-order design: `kp = Iωn²`, `kd = 2ζIωn`, `ki = ki_ratio·ωn·kp`.
    pub fn from_bandwidth(inertia: &InertiaSpec, omega_n: f64, zeta: f64, ki_ratio: f64) -> Self {
        let d = inertia.matrix.diagonal();
        let kp = d * omega_n * omega_n;
        Self {
            kp,
            kd: d * (2.0 * zeta * omega_n),
            ki: kp * (ki_ratio * omega_n),
            integrator_limit: 0.05,
        }
    }

    pub fn without_integral(mut self) -> Self {
        self.ki = Vec3::zeros();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.kp[k] > 0.0 && self.kp[k].is_finite()) {
                return Err(Error::invalid("gains.kp", "must be positive"));
            }
            if !(self.kd[k] > 0.0 && self.kd[k].is_finite()) {
                return Err(Error::invalid("gains.kd", "must be positive"));
            }
            if !(self.ki[k] >= 0.0 && self.ki[k].is_finite()) {
                return Err(Error::invalid("gains.ki", "must be ≥ 0"));
            }
        }
        if self.ki.iter().any(|&k| k > 0.0) && !(self.integrator_limit > 0.0) {
            return Err(Error::invalid("gains.integrator_limit", "must be positive when ki > 0"));
        }
        Ok(())
    }
}

/// Rotation vector of `q_target⁻¹ ⊗ q_current`, expressed in the body frame,
/// on the shortest-path branch.
pub fn attitude_error(q_current: UnitQuaternion, q_target: UnitQuaternion) -> Vec3 {
    (q_target.inverse() * q_current).to_rotation_vector()
}

/// `τ = −kp∘e − kd∘ω`.
pub fn pd_torque(error: &Vec3, rate: &Vec3, gains: &PidGains) -> Vec3 {
    -gains.kp.component_mul(error) - gains.kd.component_mul(rate)
}

/// PD plus `−ki∘∫e dt`; the integral is clamped per axis. Returns the
/// torque and the updated integral.
pub fn pid_torque(error: &Vec3, rate: &Vec3, integral: &Vec3, dt: f64, gains: &PidGains) -> (Vec3, Vec3) {
    if gains.ki == Vec3::zeros() {
        return (pd_torque(error, rate, gains), *integral);
    }
    let lim = gains.integrator_limit;
    let next = (integral + error * dt).map(|c| c.clamp(-lim, lim));
    (pd_torque(error, rate, gains) - gains.ki.component_mul(&next), next)
}

/// Dipole command `m = (k/|B|²)(h × B)`, clamped per axis.
///
/// The resulting torque `m × B = −k·h⊥` never has a component along `h`,
/// and the per-axis clamp only shrinks `m` along directions that keep
/// `m·(h × B) ≥ 0`, so `h·τ ≤ 0` still holds after clamping.
pub fn momentum_dump_command(wheel_momentum: &Vec3, b_body: &Vec3, gain: f64, spec: &MagnetorquerSpec) -> Result<Vec3> {
    let b2 = b_body.norm_squared();
    if !(b2 > 0.0) || !b2.is_finite() {
        return Err(Error::DegenerateField(b2.sqrt()));
    }
    Ok(spec.clamp(&(wheel_momentum.cross(b_body) * (gain / b2))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafeHoldGains {
    /// Sun-alignment gain (N·m per unit of |n × ŝ|).
    pub kp: f64,
    /// Rate-damping gain (N·m per rad/s).
    pub kd: f64,
    /// Solar-panel normal in the body frame.
    pub panel_normal: Vec3,
}

impl Default for SafeHoldGains {
    fn default() -> Self {
        Self {
            kp: 3.0,
            kd: 120.0,
            panel_normal: Vec3::x(),
        }
    }
}

impl SafeHoldGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0) {
            return Err(Error::invalid("safe_hold.kp", "must be positive"));
        }
        if !(self.kd > 0.0) {
            return Err(Error::invalid("safe_hold.kd", "must be positive"));
        }
        if self.panel_normal.try_normalize(1e-12).is_none() || !is_finite_vec(&self.panel_normal) {
            return Err(Error::invalid("safe_hold.panel_normal", "must be a non-zero vector"));
        }
        Ok(())
    }
}

/// Sun-pointing with rate damping on the thrusters. Coarse sun-vector
/// feedback only; with no sun (eclipse) it just damps the rate.
pub fn safe_hold_torque(sun_body: &Vec3, omega: &Vec3, gains: &SafeHoldGains, thrusters: &ThrusterTorqueSpec) -> Vec3 {
    let n = gains.panel_normal.normalize();
    let align = match sun_body.try_normalize(1e-12) {
        Some(s) => n.cross(&s) * gains.kp,
        None => Vec3::zeros(),
    };
    thrusters.clamp(&(align - omega * gains.kd))
}

/// Nominal target attitude (body → inertial): body +z toward nadir, body +y
/// normal to the sun line so the panels (normal +x) see the sun, and
/// x = y × z. When the sun lies on the nadir line the orbit frame is used
/// (y opposite the orbit normal).
pub fn nadir_target(position: &Vec3, velocity: &Vec3, sun_direction: &Vec3) -> Result<UnitQuaternion> {
    let z = -position
        .try_normalize(0.0)
        .ok_or_else(|| Error::domain("nadir target needs a non-zero position"))?;
    let y = z
        .cross(sun_direction)
        .try_normalize(1e-6)
        .or_else(|| (-position.cross(velocity)).try_normalize(0.0))
        .ok_or_else(|| Error::domain("nadir target frame is undefined"))?;
    let x = y.cross(&z);
    Ok(UnitQuaternion::from_matrix(&Mat3::from_columns(&[x, y, z])))
}

/// Body-frame rate taking `q0` to `q1` in `dt`.
pub fn target_rate(q0: UnitQuaternion, q1: UnitQuaternion, dt: f64) -> Vec3 {
    (q0.inverse() * q1).to_rotation_vector() / dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::{step_attitude, AppliedTorques, RigidBodyState, WheelSpec};
    use approx::assert_relative_eq;

    fn strong_wheels() -> WheelSpec {
        WheelSpec {
            max_torque: 10.0,
            max_momentum: 1e3,
        }
    }

    #[test]
    fn error_of_identical_attitudes_is_zero() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 2.0);
        assert!(attitude_error(q, q).norm() < 1e-15);
    }

    #[test]
    fn error_about_x() {
        let target = UnitQuaternion::from_axis_angle(&Vec3::z(), 0.7);
        let current = target * UnitQuaternion::from_axis_angle(&Vec3::x(), 10f64.to_radians());
        let e = attitude_error(current, target);
        assert!((e - Vec3::new(0.174_532_925, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn error_ignores_quaternion_sign() {
        let t = UnitQuaternion::from_axis_angle(&Vec3::y(), 0.3);
        let c = UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.5);
        let neg = UnitQuaternion {
            w: -t.w,
            x: -t.x,
            y: -t.y,
            z: -t.z,
        };
        assert!((attitude_error(c, t) - attitude_error(c, neg)).norm() < 1e-15);
    }

    fn unit_gains(kp: f64, kd: f64) -> PidGains {
        PidGains {
            kp: Vec3::repeat(kp),
            ki: Vec3::zeros(),
            kd: Vec3::repeat(kd),
            integrator_limit: 1.0,
        }
    }

    #[test]
    fn pd_arithmetic() {
        let g = unit_gains(2.0, 1.0);
        assert_eq!(pd_torque(&Vec3::zeros(), &Vec3::zeros(), &g), Vec3::zeros());
        assert_eq!(
            pd_torque(&Vec3::new(0.1, 0.0, 0.0), &Vec3::zeros(), &g),
            Vec3::new(-0.2, 0.0, 0.0)
        );
    }

    #[test]
    fn pid_without_ki_is_pd() {
        let g = unit_gains(2.0, 3.0);
        let (e, w, i) = (
            Vec3::new(0.1, -0.2, 0.3),
            Vec3::new(0.01, 0.0, -0.02),
            Vec3::new(0.5, 0.0, 0.0),
        );
        let (tau, next) = pid_torque(&e, &w, &i, 0.1, &g);
        assert_eq!(tau, pd_torque(&e, &w, &g));
        assert_eq!(next, i);
    }

    #[test]
    fn pid_integral_clamps() {
        let mut g = unit_gains(1.0, 1.0);
        g.ki = Vec3::repeat(0.1);
        g.integrator_limit = 0.3;
        let mut integral = Vec3::zeros();
        for _ in 0..1000 {
            integral = pid_torque(&Vec3::new(1.0, -1.0, 0.0), &Vec3::zeros(), &integral, 0.1, &g).1;
        }
        assert_eq!(integral, Vec3::new(0.3, -0.3, 0.0));
    }

    #[test]
    fn gain_validation_rejects_bad_values() {
        let mut g = unit_gains(1.0, 1.0);
        assert!(g.validate().is_ok());
        g.kd.y = 0.0;
        assert!(matches!(g.validate(), Err(Error::Validation { field, .. }) if field == "gains.kd"));
        let mut g = unit_gains(1.0, 1.0);
        g.ki.x = 1.0;
        g.integrator_limit = 0.0;
        assert!(g.validate().is_err());
    }

    /// Single-axis slew on a spherical body; returns the error angle history.
    fn slew(inertia: f64, gains: &PidGains, e0: f64, dt: f64, seconds: f64, disturbance: Vec3, pid: bool) -> Vec<f64> {
        let inertia_spec = InertiaSpec::diagonal(inertia, inertia, inertia).unwrap();
        let target = UnitQuaternion::IDENTITY;
        let mut s = RigidBodyState::at_rest(UnitQuaternion::from_axis_angle(&Vec3::x(), e0));
        let mut integral = Vec3::zeros();
        let mut out = vec![e0];
        for _ in 0..(seconds / dt).round() as usize {
            let e = attitude_error(s.q, target);
            let u = if pid {
                let (u, i) = pid_torque(&e, &s.omega, &integral, dt, gains);
                integral = i;
                u
            } else {
                pd_torque(&e, &s.omega, gains)
            };
            let torques = AppliedTorques {
                external: disturbance,
                wheel_command: -u,
            };
            s = step_attitude(&s, &inertia_spec, &strong_wheels(), &torques, dt)
                .unwrap()
                .state;
            out.push(attitude_error(s.q, target).x);
        }
        out
    }

    #[test]
    fn critically_damped_slew_matches_scalar_oracle() {
        let (inertia, wn, dt): (f64, f64, f64) = (1000.0, 0.05, 0.1);
        let kp = inertia * wn * wn;
        let kd = (4.0 * kp * inertia).sqrt();
        let e0 = 10f64.to_radians();
        let hist = slew(inertia, &unit_gains(kp, kd), e0, dt, 8.0 / wn, Vec3::zeros(), false);
        for (k, e) in hist.iter().enumerate() {
            let t = k as f64 * dt;
            let oracle = e0 * (1.0 + wn * t) * (-wn * t).exp();
            assert!((e - oracle).abs() < 0.02 * e0, "t={t} sim={e} oracle={oracle}");
            assert!(*e > -0.1f64.to_radians());
        }
        // 2 % settling of a critically damped pair: (1 + x)e^(−x) = 0.02 at x ≈ 5.834
        let settle = hist.iter().rposition(|e| e.abs() > 0.02 * e0).unwrap() as f64 * dt;
        assert_relative_eq!(settle * wn, 5.834, max_relative = 0.02);
    }

    #[test]
    fn pd_offset_and_pid_nulling_under_disturbance() {
        let (inertia, wn, dt): (f64, f64, f64) = (1000.0, 0.05, 0.1);
        let d = 1e-5;
        let mut g = unit_gains(inertia * wn * wn, 2.0 * inertia * wn);
        let pd = slew(inertia, &g, 0.0, dt, 600.0, Vec3::new(d, 0.0, 0.0), false);
        let offset = d / g.kp.x;
        assert_relative_eq!(*pd.last().unwrap(), offset, max_relative = 0.1);

        g.ki = g.kp * (0.2 * wn);
        g.integrator_limit = 1.0;
        let pid = slew(inertia, &g, 0.0, dt, 3000.0, Vec3::new(d, 0.0, 0.0), true);
        assert!(pid.last().unwrap().abs() < 1e-3 * offset);
    }

    #[test]
    fn dump_law_degeneracies() {
        let spec = MagnetorquerSpec::default();
        let b = Vec3::new(1e-7, 2e-7, -3e-7);
        assert_eq!(
            momentum_dump_command(&Vec3::zeros(), &b, 1e-3, &spec).unwrap(),
            Vec3::zeros()
        );
        assert!(momentum_dump_command(&(b * 1e7), &b, 1e-3, &spec).unwrap().norm() < 1e-12);
        assert!(matches!(
            momentum_dump_command(&Vec3::x(), &Vec3::zeros(), 1e-3, &spec),
            Err(Error::DegenerateField(_))
        ));
    }

    #[test]
    fn dump_torque_never_loads_wheels() {
        let spec = MagnetorquerSpec { max_dipole: 50.0 };
        let mut seed = 1u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..2000 {
            let h = Vec3::new(next(), next(), next()) * 8.0;
            let b = Vec3::new(next(), next(), next()) * 1e-6;
            let m = momentum_dump_command(&h, &b, 1e-2 * (next() + 0.6), &spec).unwrap();
            assert!(h.dot(&m.cross(&b)) <= 1e-18);
        }
    }

    #[test]
    fn safe_hold_recovers_from_tumble() {
        let inertia = InertiaSpec::diagonal(1200.0, 1000.0, 800.0).unwrap();
        let thrusters = ThrusterTorqueSpec::default();
        let gains = SafeHoldGains::default();
        let sun = Vec3::new(0.3, -0.8, 0.52).normalize();
        let rate0 = 5f64.to_radians();
        let mut s = RigidBodyState {
            omega: Vec3::new(1.0, -0.5, 0.7).normalize() * rate0,
            ..RigidBodyState::at_rest(UnitQuaternion::from_axis_angle(&Vec3::new(0.2, 1.0, -0.3), 2.5))
        };
        let dt = 0.1;
        let mut fuel = 0.0;
        for _ in 0..(1800.0 / dt) as usize {
            let sun_body = s.q.inverse_rotate(&sun);
            let tau = safe_hold_torque(&sun_body, &s.omega, &gains, &thrusters);
            fuel += thrusters.propellant_used(&tau, dt);
            let torques = AppliedTorques {
                external: tau,
                wheel_command: Vec3::zeros(),
            };
            s = step_attitude(&s, &inertia, &WheelSpec::default(), &torques, dt)
                .unwrap()
                .state;
        }
        let sun_angle = gains.panel_normal.angle(&s.q.inverse_rotate(&sun));
        assert!(s.omega.norm() < 0.1f64.to_radians(), "rate {}", s.omega.norm());
        assert!(sun_angle < 10f64.to_radians(), "sun angle {}", sun_angle.to_degrees());
        assert!(fuel > 0.0);
    }

    #[test]
    fn nadir_frame_geometry() {
        let r = Vec3::new(2.0e7, 1.0e7, 5.0e6);
        let v = Vec3::new(-1500.0, 3000.0, 1000.0);
        let sun = Vec3::new(0.2, -0.9, 0.4).normalize();
        let q = nadir_target(&r, &v, &sun).unwrap();
        assert!((q.rotate(&Vec3::z()) + r.normalize()).norm() < 1e-12);
        assert!(q.rotate(&Vec3::y()).dot(&sun).abs() < 1e-12);
        assert!(q.rotate(&Vec3::x()).dot(&sun) > 0.0);
        // sun on the nadir line falls back to the orbit frame
        let q = nadir_target(&r, &v, &r.normalize()).unwrap();
        assert!(q.rotate(&Vec3::y()).dot(&r.cross(&v).normalize()) < -0.999_999);
        assert!(nadir_target(&Vec3::zeros(), &v, &sun).is_err());
    }

    #[test]
    fn target_rate_recovers_spin() {
        let w = Vec3::new(1e-4, -2e-4, 3e-4);
        let q0 = UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 0.0, 1.0), 0.3);
        let q1 = q0 * UnitQuaternion::from_rotation_vector(&(w * 10.0));
        assert!((target_rate(q0, q1, 10.0) - w).norm() < 1e-15);
    }
}
