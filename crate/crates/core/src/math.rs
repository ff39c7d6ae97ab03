//! Shared numerical kernel: vector/matrix aliases, unit quaternions and the
//! fixed-step RK4 integrator used by every dynamics module.
//!
//! Quaternion convention (fixed project-wide):
//!
//! * scalar-first Hamilton quaternions `(w, x, y, z)`, `i·j = k`;
//! * an attitude quaternion `q` maps body-frame components into the inertial
//!   frame, `v_I = q ⊗ v_B ⊗ q*`;
//! * `a * b` is the Hamilton product, so `(a * b).rotate(v) == a.rotate(b.rotate(v))`:
//!   `b` is applied to the vector first, then `a`;
//! * every constructor and product returns the canonical sign `w ≥ 0`.

use std::ops::Mul;

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat6 = SMatrix<f64, 6, 6>;

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn is_finite_vec(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes the raw components.
    ///
    /// A zero (or non-finite) input collapses to the identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Self::IDENTITY;
        }
        let s = if w < 0.0 { -1.0 / n } else { 1.0 / n };
        Self {
            w: w * s,
            x: x * s,
            y: y * s,
            z: z * s,
        }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let u = axis / n;
        Self::new(c, s * u.x, s * u.y, s * u.z)
    }

    /// Rotation by `|v|` radians about `v`.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // second-order series keeps tiny corrections exact to rounding
            return Self::new(1.0 - angle * angle / 8.0, v.x / 2.0, v.y / 2.0, v.z / 2.0);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Shortest-path rotation vector (angle ∈ [0, π]).
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = self.canonical();
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-15 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Self {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn inverse(self) -> Self {
        self.conjugate()
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn vector_part(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// `q ⊗ (0, v) ⊗ q*`, computed without forming the product.
    pub fn rotate(self, v: &Vec3) -> Vec3 {
        let u = self.vector_part();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// `q* ⊗ (0, v) ⊗ q`.
    pub fn inverse_rotate(self, v: &Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    /// Rotation matrix `R` with `R * v == self.rotate(v)`.
    pub fn to_matrix(self) -> Mat3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Attitude whose body axes, expressed in the inertial frame, are the
    /// columns of `m`. `m` must be a proper rotation.
    pub fn from_matrix(m: &Mat3) -> Self {
        // Shepperd's method: branch on the largest diagonal combination.
        let tr = m.trace();
        let cands = [tr, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let mut k = 0;
        for i in 1..4 {
            if cands[i] > cands[k] {
                k = i;
            }
        }
        match k {
            0 => {
                let s = 2.0 * (1.0 + tr).sqrt();
                Self::new(
                    0.25 * s,
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(1, 0)] - m[(0, 1)]) / s,
                )
            }
            1 => {
                let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
                Self::new(
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    0.25 * s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                )
            }
            2 => {
                let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
                Self::new(
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    0.25 * s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                )
            }
            _ => {
                let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
                Self::new(
                    (m[(1, 0)] - m[(0, 1)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                    0.25 * s,
                )
            }
        }
    }

    /// Rotation angle between two attitudes, in [0, π].
    pub fn angle_to(self, other: Self) -> f64 {
        (self.inverse() * other).to_rotation_vector().norm()
    }
}

fn hamilton(a: &UnitQuaternion, b: &UnitQuaternion) -> [f64; 4] {
    [
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    ]
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: Self) -> Self {
        UnitQuaternion::from_array(hamilton(&self, &rhs))
    }
}

/// Hamilton product, renormalized. See the module docs for the order.
pub fn quat_multiply(q1: UnitQuaternion, q2: UnitQuaternion) -> UnitQuaternion {
    q1 * q2
}

pub fn quat_rotate(q: UnitQuaternion, v: &Vec3) -> Vec3 {
    q.rotate(v)
}

/// `½ q ⊗ (0, ω)` as raw components (not normalized), ω in body axes.
pub fn quat_rate(q: &[f64; 4], omega: &Vec3) -> [f64; 4] {
    let [w, x, y, z] = *q;
    [
        0.5 * (-x * omega.x - y * omega.y - z * omega.z),
        0.5 * (w * omega.x + y * omega.z - z * omega.y),
        0.5 * (w * omega.y - x * omega.z + z * omega.x),
        0.5 * (w * omega.z + x * omega.y - y * omega.x),
    ]
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for (o, ki) in out.iter_mut().zip(k) {
        *o += h * ki;
    }
    out
}

/// One classical fourth-order Runge–Kutta step of `dx/dt = f(t, x)`.
///
/// Any embedded quaternion is left unnormalized; the caller owns that.
pub fn rk4_step<const N: usize, F>(f: F, state: &[f64; N], t: f64, dt: f64) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("step size must be positive, got {dt}")));
    }
    let check = |k: [f64; N], at: f64| -> Result<[f64; N]> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::IntegrationFailure { t: at })
        }
    };
    let h2 = dt / 2.0;
    let k1 = check(f(t, state), t)?;
    let k2 = check(f(t + h2, &axpy(state, h2, &k1)), t + h2)?;
    let k3 = check(f(t + h2, &axpy(state, h2, &k2)), t + h2)?;
    let k4 = check(f(t + dt, &axpy(state, dt, &k3)), t + dt)?;
    let mut out = *state;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Degrees to radians, for the many places angles arrive in degrees.
pub fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Wraps an angle into [0, 2π).
pub fn wrap_two_pi(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = x.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_two_pi(x);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Quaternion as NaQuat, UnitQuaternion as NaUnit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_quat(rng: &mut impl Rng) -> UnitQuaternion {
        UnitQuaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn random_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    // independent route: nalgebra's own quaternion → rotation matrix
    fn oracle_matrix(q: UnitQuaternion) -> Mat3 {
        NaUnit::from_quaternion(NaQuat::new(q.w, q.x, q.y, q.z))
            .to_rotation_matrix()
            .into_inner()
    }

    #[test]
    fn identity_and_inverse() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 2.0, -0.5), 0.7);
        assert_eq!(UnitQuaternion::IDENTITY * q, q);
        let e = q * q.conjugate();
        assert_relative_eq!(e.w, 1.0, epsilon = 1e-15);
        assert!(e.vector_part().norm() < 1e-15);
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        let qz = UnitQuaternion::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let q = qz * qz;
        let want = oracle_matrix(qz) * oracle_matrix(qz);
        assert!((q.to_matrix() - want).norm() < 1e-15);
        assert_relative_eq!(q.to_rotation_vector().z, PI, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_about_z_permutes_axes() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let v = q.rotate(&Vec3::x());
        assert!((v - Vec3::y()).norm() < 1e-15);
        assert_eq!(UnitQuaternion::IDENTITY.rotate(&Vec3::x()), Vec3::x());
    }

    #[test]
    fn rotation_and_composition_match_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b, c) = (random_quat(&mut rng), random_quat(&mut rng), random_quat(&mut rng));
            let v = random_vec(&mut rng, 10.0);
            let rv = a.rotate(&v);
            assert!((rv - oracle_matrix(a) * v).norm() <= 1e-12 * v.norm());
            assert_relative_eq!(rv.norm(), v.norm(), max_relative = 1e-12);
            let ab = a * b;
            assert!((ab.to_matrix() - oracle_matrix(a) * oracle_matrix(b)).norm() < 1e-12);
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            assert!(
                (lhs.to_array().iter().zip(rhs.to_array()).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max) < 1e-12
            );
            assert!(ab.w >= 0.0);
            assert!((ab.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_vector_roundtrip_and_matrix_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_quat(&mut rng);
            let back = UnitQuaternion::from_rotation_vector(&q.to_rotation_vector());
            assert!(q.angle_to(back) < 1e-10);
            let m = UnitQuaternion::from_matrix(&q.to_matrix());
            assert!(q.angle_to(m) < 1e-10);
        }
    }

    #[test]
    fn sign_is_canonical() {
        let q = UnitQuaternion::new(-0.5, 0.5, 0.5, 0.5);
        assert!(q.w > 0.0);
        assert_eq!(q, UnitQuaternion::new(0.5, -0.5, -0.5, -0.5));
    }

    #[test]
    fn rk4_trivial_cases() {
        let x = [1.0, -2.0];
        assert_eq!(rk4_step(|_, _| [0.0, 0.0], &x, 0.0, 0.3).unwrap(), x);
        assert_eq!(rk4_step(|_, _| [1.0, 1.0], &x, 0.0, 1.0).unwrap(), [2.0, -1.0]);
        let err = rk4_step(|t, _| [if t > 0.2 { f64::NAN } else { 0.0 }, 0.0], &x, 0.0, 1.0);
        assert!(matches!(err, Err(Error::IntegrationFailure { t }) if t == 0.5));
        assert!(rk4_step(|_, _| [0.0, 0.0], &x, 0.0, 0.0).is_err());
    }

    fn oscillator_error(n: usize) -> f64 {
        let period = 2.0 * PI;
        let dt = period / n as f64;
        let mut x = [1.0, 0.0];
        for k in 0..n {
            x = rk4_step(|_, s| [s[1], -s[0]], &x, k as f64 * dt, dt).unwrap();
        }
        ((x[0] - 1.0).powi(2) + x[1].powi(2)).sqrt()
    }

    #[test]
    fn rk4_oscillator_closes_one_period() {
        assert!(oscillator_error(1000) < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let ns = [50, 100, 200, 400];
        let errs: Vec<f64> = ns.iter().map(|&n| oscillator_error(n)).collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope >= 3.8, "convergence slope {slope}");
        }
    }

    #[test]
    fn wrap_helpers() {
        assert_relative_eq!(wrap_two_pi(-0.5), 2.0 * PI - 0.5);
        assert_relative_eq!(wrap_pi(1.5 * PI), -0.5 * PI);
        assert!(wrap_two_pi(2.0 * PI) < 1e-15);
    }
}
