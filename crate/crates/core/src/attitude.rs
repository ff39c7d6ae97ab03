//! Rigid-body attitude truth model: Euler's rotational equation with a
//! reaction-wheel momentum vector, quaternion kinematics, magnetorquers and an
//! axial dipole geomagnetic field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_finite_vec, quat_rate, rk4_step, Mat3, UnitQuaternion, Vec3};
use crate::orbit::BodyConstants;

/// Equatorial surface field strength of the dipole model (T).
pub const DIPOLE_SURFACE_FIELD: f64 = 3.12e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// Body-to-inertial attitude.
    pub q: UnitQuaternion,
    /// Body rate in body axes (rad/s).
    pub omega: Vec3,
    /// Stored wheel angular momentum in body axes (N·m·s).
    pub wheel_momentum: Vec3,
    pub epoch: f64,
}

impl RigidBodyState {
    pub fn at_rest(q: UnitQuaternion) -> Self {
        Self {
            q,
            omega: Vec3::zeros(),
            wheel_momentum: Vec3::zeros(),
            epoch: 0.0,
        }
    }

    fn to_array(self) -> [f64; 10] {
        let (q, w, h) = (self.q, self.omega, self.wheel_momentum);
        [q.w, q.x, q.y, q.z, w.x, w.y, w.z, h.x, h.y, h.z]
    }

    fn from_array(x: &[f64; 10], epoch: f64) -> Self {
        Self {
            q: UnitQuaternion::new(x[0], x[1], x[2], x[3]),
            omega: Vec3::new(x[4], x[5], x[6]),
            wheel_momentum: Vec3::new(x[7], x[8], x[9]),
            epoch,
        }
    }

    /// Total angular momentum (body + wheels) in inertial axes.
    pub fn inertial_momentum(&self, inertia: &InertiaSpec) -> Vec3 {
        self.q.rotate(&(inertia.matrix * self.omega + self.wheel_momentum))
    }

    /// Rotational kinetic energy of the rigid body, ½ ωᵀIω.
    pub fn kinetic_energy(&self, inertia: &InertiaSpec) -> f64 {
        0.5 * self.omega.dot(&(inertia.matrix * self.omega))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InertiaRepr", into = "InertiaRepr")]
pub struct InertiaSpec {
    pub matrix: Mat3,
    inverse: Mat3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InertiaRepr {
    /// Row-major 3×3 inertia matrix (kg·m²).
    matrix: [[f64; 3]; 3],
}

impl TryFrom<InertiaRepr> for InertiaSpec {
    type Error = Error;

    fn try_from(r: InertiaRepr) -> Result<Self> {
        let m = r.matrix;
        InertiaSpec::new(Mat3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ))
    }
}

impl From<InertiaSpec> for InertiaRepr {
    fn from(s: InertiaSpec) -> Self {
        let m = s.matrix;
        InertiaRepr {
            matrix: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
        }
    }
}

impl InertiaSpec {
    /// Validates symmetry, positive definiteness and the triangle inequality
    /// on the principal moments.
    pub fn new(matrix: Mat3) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("inertia", "entries must be finite"));
        }
        let scale = matrix.abs().max();
        if (matrix - matrix.transpose()).abs().max() > 1e-9 * scale.max(1.0) {
            return Err(Error::invalid("inertia", "matrix is not symmetric"));
        }
        for k in 0..3 {
            if matrix[(k, k)] <= 0.0 {
                return Err(Error::invalid(
                    format!("inertia[{k}][{k}]"),
                    "diagonal moments must be positive",
                ));
            }
        }
        let eig = matrix.symmetric_eigen().eigenvalues;
        if eig.iter().any(|&l| l <= 0.0) {
            return Err(Error::invalid("inertia", "matrix is not positive definite"));
        }
        let (a, b, c) = (eig[0], eig[1], eig[2]);
        let tol = 1e-12 * (a + b + c);
        if a + b < c - tol || a + c < b - tol || b + c < a - tol {
            return Err(Error::invalid(
                "inertia",
                "principal moments violate the triangle inequality",
            ));
        }
        let inverse = matrix
            .try_inverse()
            .ok_or_else(|| Error::Configuration("inertia matrix is singular".into()))?;
        Ok(Self { matrix, inverse })
    }

    pub fn diagonal(ixx: f64, iyy: f64, izz: f64) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vec3::new(ixx, iyy, izz)))
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.inverse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelSpec {
    /// Per-axis torque limit (N·m).
    pub max_torque: f64,
    /// Per-axis stored-momentum limit (N·m·s).
    pub max_momentum: f64,
}

impl Default for WheelSpec {
    fn default() -> Self {
        Self {
            max_torque: 0.2,
            max_momentum: 4.0,
        }
    }
}

impl WheelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_torque > 0.0) {
            return Err(Error::invalid("wheels.max_torque", "must be positive"));
        }
        if !(self.max_momentum > 0.0) {
            return Err(Error::invalid("wheels.max_momentum", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetorquerSpec {
    /// Per-axis dipole limit (A·m²).
    pub max_dipole: f64,
}

impl Default for MagnetorquerSpec {
    fn default() -> Self {
        Self { max_dipole: 500.0 }
    }
}

impl MagnetorquerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_dipole > 0.0) {
            return Err(Error::invalid("magnetorquers.max_dipole", "must be positive"));
        }
        Ok(())
    }

    pub fn clamp(&self, m: &Vec3) -> Vec3 {
        m.map(|c| c.clamp(-self.max_dipole, self.max_dipole))
    }
}

/// Ideal attitude thrusters: a per-axis torque source with a propellant cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrusterTorqueSpec {
    /// Per-axis torque limit (N·m).
    pub max_torque: f64,
    /// Lever arm used to convert torque to thrust (m).
    pub moment_arm: f64,
    pub isp: f64,
}

impl Default for ThrusterTorqueSpec {
    fn default() -> Self {
        Self {
            max_torque: 1.0,
            moment_arm: 1.0,
            isp: 220.0,
        }
    }
}

impl ThrusterTorqueSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_torque > 0.0) {
            return Err(Error::invalid("thrusters.max_torque", "must be positive"));
        }
        if !(self.moment_arm > 0.0) {
            return Err(Error::invalid("thrusters.moment_arm", "must be positive"));
        }
        if !(self.isp > 0.0) {
            return Err(Error::invalid("thrusters.isp", "must be positive"));
        }
        Ok(())
    }

    pub fn clamp(&self, torque: &Vec3) -> Vec3 {
        torque.map(|c| c.clamp(-self.max_torque, self.max_torque))
    }

    /// Propellant (kg) spent holding `torque` for `dt`; one couple per axis.
    pub fn propellant_used(&self, torque: &Vec3, dt: f64) -> f64 {
        let thrust = torque.abs().sum() / self.moment_arm;
        thrust * dt / (self.isp * crate::G0)
    }
}

/// Body angular acceleration and wheel-momentum rate.
///
/// `wheel_torque` is the torque applied *to the wheels*; the body feels its
/// negative. `ω̇ = I⁻¹(T_ext − τ_w − ω × (Iω + h))`, `ḣ = τ_w`.
pub fn euler_rhs(
    state: &RigidBodyState,
    inertia: &InertiaSpec,
    external_torque: &Vec3,
    wheel_torque: &Vec3,
) -> (Vec3, Vec3) {
    let w = state.omega;
    let total = inertia.matrix * w + state.wheel_momentum;
    let omega_dot = inertia.inverse * (external_torque - wheel_torque - w.cross(&total));
    (omega_dot, *wheel_torque)
}

/// q̇ = ½ q ⊗ (0, ω).
pub fn quat_kinematics(q: &UnitQuaternion, omega: &Vec3) -> [f64; 4] {
    quat_rate(&q.to_array(), omega)
}

/// τ = m × B with the commanded dipole clamped per axis.
pub fn magnetorquer_torque(commanded_dipole: &Vec3, b_body: &Vec3, spec: &MagnetorquerSpec) -> Vec3 {
    spec.clamp(commanded_dipole).cross(b_body)
}

/// Untilted, Earth-centred dipole; the moment points along −z so the field
/// at the equator points north.
pub fn dipole_field(position: &Vec3, body: &BodyConstants) -> Result<Vec3> {
    let r = position.norm();
    if !(r >= body.re / 2.0) {
        return Err(Error::domain(format!(
            "dipole field undefined at |r| = {r:.1} m (below Re/2)"
        )));
    }
    let rh = position / r;
    let m_hat = -Vec3::z();
    let k = DIPOLE_SURFACE_FIELD * (body.re / r).powi(3);
    Ok(k * (3.0 * m_hat.dot(&rh) * rh - m_hat))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AppliedTorques {
    /// Environmental plus magnetorquer plus thruster torque on the body (N·m).
    pub external: Vec3,
    /// Torque commanded onto the wheels (N·m).
    pub wheel_command: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeStep {
    pub state: RigidBodyState,
    /// Wheel torque actually delivered after saturation.
    pub wheel_torque: Vec3,
    pub wheel_saturated: bool,
}

/// Limits a wheel torque command by the torque and stored-momentum limits.
pub fn saturate_wheel_command(command: &Vec3, momentum: &Vec3, wheels: &WheelSpec) -> (Vec3, bool) {
    let mut out = *command;
    let mut saturated = false;
    for k in 0..3 {
        let c = command[k].clamp(-wheels.max_torque, wheels.max_torque);
        let at_limit = momentum[k].abs() >= wheels.max_momentum;
        if at_limit && c * momentum[k] > 0.0 {
            out[k] = 0.0;
            saturated = true;
        } else {
            out[k] = c;
        }
    }
    (out, saturated)
}

/// One RK4 step of the coupled (q, ω, h) dynamics. Torques are held
/// constant across the step.
pub fn step_attitude(
    state: &RigidBodyState,
    inertia: &InertiaSpec,
    wheels: &WheelSpec,
    torques: &AppliedTorques,
    dt: f64,
) -> Result<AttitudeStep> {
    if !is_finite_vec(&torques.external) || !is_finite_vec(&torques.wheel_command) {
        return Err(Error::IntegrationFailure { t: state.epoch });
    }
    let (wheel_torque, mut saturated) = saturate_wheel_command(&torques.wheel_command, &state.wheel_momentum, wheels);
    let ext = torques.external;
    let rhs = |_t: f64, x: &[f64; 10]| -> [f64; 10] {
        let q = [x[0], x[1], x[2], x[3]];
        let w = Vec3::new(x[4], x[5], x[6]);
        let h = Vec3::new(x[7], x[8], x[9]);
        let total = inertia.matrix * w + h;
        let wd = inertia.inverse * (ext - wheel_torque - w.cross(&total));
        let qd = quat_rate(&q, &w);
        [
            qd[0],
            qd[1],
            qd[2],
            qd[3],
            wd.x,
            wd.y,
            wd.z,
            wheel_torque.x,
            wheel_torque.y,
            wheel_torque.z,
        ]
    };
    let x = rk4_step(rhs, &state.to_array(), state.epoch, dt)?;
    let mut next = RigidBodyState::from_array(&x, state.epoch + dt);
    for k in 0..3 {
        let h = next.wheel_momentum[k];
        if h.abs() > wheels.max_momentum {
            next.wheel_momentum[k] = h.signum() * wheels.max_momentum;
            saturated = true;
        }
    }
    Ok(AttitudeStep {
        state: next,
        wheel_torque,
        wheel_saturated: saturated,
    })
}
