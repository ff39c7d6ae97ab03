//! Attitude determination: sensor models and a multiplicative error-state
//! Kalman filter with gyro-bias estimation.
//!
//! The filter carries the attitude as a reference quaternion `q_hat` and a
//! six-element error state `δx = (δθ, δb)`, where the true attitude is
//! `q_hat ⊗ exp(δθ/2)` (body-frame error) and the true gyro bias is
//! `bias_hat + δb`. Between updates the error state is zero, so the
//! measurement update is the linear Kalman correction
//! `x̂⁺ = x̂⁻ + K(z − H x̂⁻)` applied to `δx` and then folded back into
//! `q_hat` multiplicatively and into `bias_hat` additively.

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_finite_vec, skew, Mat3, Mat6, UnitQuaternion, Vec3};

pub type Vec6 = SVector<f64, 6>;

/// One arcsecond in radians.
pub const ARCSEC: f64 = 4.848_136_811_095_36e-6;
/// One degree per hour in rad/s.
pub const DEG_PER_HOUR: f64 = 4.848_136_811_095_36e-6;
/// Default innovation gate, in standard deviations of the Mahalanobis distance.
pub const DEFAULT_GATE_SIGMA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleRates {
    pub gyro: f64,
    pub star_tracker: f64,
    pub sun_sensor: f64,
    pub earth_sensor: f64,
    pub magnetometer: f64,
}

impl Default for SampleRates {
    fn default() -> Self {
        Self {
            gyro: 10.0,
            star_tracker: 1.0,
            sun_sensor: 1.0,
            earth_sensor: 1.0,
            magnetometer: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSuite {
    /// Per-axis star-tracker noise (rad).
    pub star_tracker_sigma: f64,
    /// White rate noise per gyro sample (rad/s).
    pub gyro_noise_sigma: f64,
    /// Bias random-walk density (rad/s/√s).
    pub gyro_bias_walk_sigma: f64,
    /// True bias at start of run (rad/s).
    pub gyro_initial_bias: Vec3,
    /// Per-axis coarse sun-sensor noise (rad).
    pub sun_sensor_sigma: f64,
    /// Per-axis Earth-sensor noise (rad).
    pub earth_sensor_sigma: f64,
    /// Per-axis magnetometer noise (T).
    pub magnetometer_sigma: f64,
    pub sample_rates: SampleRates,
}

impl Default for SensorSuite {
    fn default() -> Self {
        Self {
            star_tracker_sigma: ARCSEC,
            gyro_noise_sigma: 1e-6,
            gyro_bias_walk_sigma: 1e-10,
            gyro_initial_bias: Vec3::new(3.0, -2.0, 4.0) * 1e-6,
            sun_sensor_sigma: 0.5f64.to_radians(),
            earth_sensor_sigma: 0.5f64.to_radians(),
            magnetometer_sigma: 5e-9,
            sample_rates: SampleRates::default(),
        }
    }
}

impl SensorSuite {
    /// A noiseless suite: every measurement equals the truth projection.
    pub fn ideal() -> Self {
        Self {
            star_tracker_sigma: 0.0,
            gyro_noise_sigma: 0.0,
            gyro_bias_walk_sigma: 0.0,
            gyro_initial_bias: Vec3::zeros(),
            sun_sensor_sigma: 0.0,
            earth_sensor_sigma: 0.0,
            magnetometer_sigma: 0.0,
            sample_rates: SampleRates::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sensors.star_tracker_sigma", self.star_tracker_sigma),
            ("sensors.gyro_noise_sigma", self.gyro_noise_sigma),
            ("sensors.gyro_bias_walk_sigma", self.gyro_bias_walk_sigma),
            ("sensors.sun_sensor_sigma", self.sun_sensor_sigma),
            ("sensors.earth_sensor_sigma", self.earth_sensor_sigma),
            ("sensors.magnetometer_sigma", self.magnetometer_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be ≥ 0"));
            }
        }
        let r = &self.sample_rates;
        for (name, v) in [
            ("sensors.sample_rates.gyro", r.gyro),
            ("sensors.sample_rates.star_tracker", r.star_tracker),
            ("sensors.sample_rates.sun_sensor", r.sun_sensor),
            ("sensors.sample_rates.earth_sensor", r.earth_sensor),
            ("sensors.sample_rates.magnetometer", r.magnetometer),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !is_finite_vec(&self.gyro_initial_bias) {
            return Err(Error::invalid("sensors.gyro_initial_bias", "must be finite"));
        }
        Ok(())
    }

    /// Discrete process noise for a gyro-driven predict of length `dt`,
    /// matching the simulated sensor: angle noise σ_g·dt per step and a bias
    /// walk of σ_u²·dt.
    pub fn process_noise(&self, dt: f64) -> Mat6 {
        let mut q = Mat6::zeros();
        let att = (self.gyro_noise_sigma * dt).powi(2);
        let bias = self.gyro_bias_walk_sigma.powi(2) * dt;
        for k in 0..3 {
            q[(k, k)] = att;
            q[(k + 3, k + 3)] = bias;
        }
        q
    }
}

/// Inertial reference directions for the vector sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceVectors {
    /// Unit vector toward the Sun.
    pub sun: Vec3,
    /// Geomagnetic field (T), not normalized.
    pub field: Vec3,
    /// Unit vector toward the Earth's centre.
    pub nadir: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeasurementKind {
    StarTracker {
        attitude: UnitQuaternion,
    },
    SunVector {
        body: Vec3,
        reference: Vec3,
    },
    EarthVector {
        body: Vec3,
        reference: Vec3,
    },
    /// Unit field direction; covariance is in direction (radian) units.
    MagVector {
        body: Vec3,
        reference: Vec3,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub covariance: Mat3,
    pub epoch: f64,
}

/// Which sensors produce a sample at this instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SensorsDue {
    pub gyro: bool,
    pub star_tracker: bool,
    pub sun_sensor: bool,
    pub earth_sensor: bool,
    pub magnetometer: bool,
}

impl SensorsDue {
    pub fn all() -> Self {
        Self {
            gyro: true,
            star_tracker: true,
            sun_sensor: true,
            earth_sensor: true,
            magnetometer: true,
        }
    }
}

/// Truth-side gyro state: the bias drifts as a random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroState {
    pub bias: Vec3,
}

impl GyroState {
    pub fn new(suite: &SensorSuite) -> Self {
        Self {
            bias: suite.gyro_initial_bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorFrame {
    pub gyro: Option<Vec3>,
    pub measurements: Vec<Measurement>,
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    if sigma == 0.0 {
        return Vec3::zeros();
    }
    Vec3::from_fn(|_, _| {
        let n: f64 = StandardNormal.sample(rng);
        sigma * n
    })
}

fn iso_cov(sigma: f64) -> Mat3 {
    // a zero-noise sensor still needs an invertible innovation covariance
    Mat3::identity() * sigma.max(1e-12).powi(2)
}

fn unit_reference(v: &Vec3, name: &str) -> Result<Vec3> {
    v.try_normalize(0.0)
        .filter(is_finite_vec)
        .ok_or_else(|| Error::Configuration(format!("{name} reference vector must be non-zero")))
}

/// Samples the sensors that are due at `truth.epoch`.
///
/// The gyro reads `ω + b + n`; afterwards the bias advances one random-walk
/// step of length `dt_gyro`. The star tracker reports `q ⊗ exp(n/2)` and the
/// vector sensors report the body-frame reference rotated by a small random
/// angle.
pub fn simulate_measurements<R: Rng + ?Sized>(
    truth: &crate::attitude::RigidBodyState,
    suite: &SensorSuite,
    gyro: &mut GyroState,
    refs: &ReferenceVectors,
    due: SensorsDue,
    dt_gyro: f64,
    rng: &mut R,
) -> Result<SensorFrame> {
    let sun = unit_reference(&refs.sun, "sun")?;
    let nadir = unit_reference(&refs.nadir, "nadir")?;
    let field_norm = refs.field.norm();
    let field = unit_reference(&refs.field, "magnetic field")?;
    let q = truth.q;
    let mut frame = SensorFrame::default();

    if due.gyro {
        let reading = truth.omega + gyro.bias + gaussian3(rng, suite.gyro_noise_sigma);
        frame.gyro = Some(reading);
        gyro.bias += gaussian3(rng, suite.gyro_bias_walk_sigma * dt_gyro.sqrt());
    }
    if due.star_tracker {
        let noise = UnitQuaternion::from_rotation_vector(&gaussian3(rng, suite.star_tracker_sigma));
        frame.measurements.push(Measurement {
            kind: MeasurementKind::StarTracker { attitude: q * noise },
            covariance: iso_cov(suite.star_tracker_sigma),
            epoch: truth.epoch,
        });
    }
    let vector = |reference: Vec3, sigma: f64, make: fn(Vec3, Vec3) -> MeasurementKind, rng: &mut R| {
        let body = q.inverse_rotate(&reference);
        let tilt = UnitQuaternion::from_rotation_vector(&gaussian3(rng, sigma));
        Measurement {
            kind: make(tilt.rotate(&body).normalize(), reference),
            covariance: iso_cov(sigma),
            epoch: truth.epoch,
        }
    };
    if due.sun_sensor {
        let m = vector(
            sun,
            suite.sun_sensor_sigma,
            |body, reference| MeasurementKind::SunVector { body, reference },
            rng,
        );
        frame.measurements.push(m);
    }
    if due.earth_sensor {
        let m = vector(
            nadir,
            suite.earth_sensor_sigma,
            |body, reference| MeasurementKind::EarthVector { body, reference },
            rng,
        );
        frame.measurements.push(m);
    }
    if due.magnetometer {
        let m = vector(
            field,
            suite.magnetometer_sigma / field_norm,
            |body, reference| MeasurementKind::MagVector { body, reference },
            rng,
        );
        frame.measurements.push(m);
    }
    Ok(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub q_hat: UnitQuaternion,
    pub bias_hat: Vec3,
    /// Covariance of (δθ, δb).
    pub p: Mat6,
    pub epoch: f64,
}

impl EstimatorState {
    /// Default prior: (10°)² per attitude axis, (1°/h)² per bias axis.
    pub fn new(q_hat: UnitQuaternion, epoch: f64) -> Self {
        Self::with_sigmas(q_hat, 10f64.to_radians(), DEG_PER_HOUR, epoch)
    }

    pub fn with_sigmas(q_hat: UnitQuaternion, att_sigma: f64, bias_sigma: f64, epoch: f64) -> Self {
        let mut p = Mat6::zeros();
        for k in 0..3 {
            p[(k, k)] = att_sigma * att_sigma;
            p[(k + 3, k + 3)] = bias_sigma * bias_sigma;
        }
        Self {
            q_hat,
            bias_hat: Vec3::zeros(),
            p,
            epoch,
        }
    }

    /// Error state of `self` with respect to the truth: (δθ, δb).
    pub fn error_to(&self, q_true: UnitQuaternion, bias_true: &Vec3) -> Vec6 {
        let dth = (self.q_hat.inverse() * q_true).to_rotation_vector();
        let db = bias_true - self.bias_hat;
        Vec6::new(dth.x, dth.y, dth.z, db.x, db.y, db.z)
    }

    /// Normalized estimation error squared against the truth.
    pub fn nees(&self, q_true: UnitQuaternion, bias_true: &Vec3) -> Result<f64> {
        let e = self.error_to(q_true, bias_true);
        let inv = self
            .p
            .cholesky()
            .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?
            .inverse();
        Ok((e.transpose() * inv * e)[(0, 0)])
    }

    pub fn attitude_sigma(&self) -> f64 {
        (self.p[(0, 0)] + self.p[(1, 1)] + self.p[(2, 2)]).sqrt()
    }
}

fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Propagates the estimate with the bias-corrected gyro rate held over `dt`.
pub fn ekf_predict(est: &EstimatorState, gyro_reading: &Vec3, dt: f64, process_noise: &Mat6) -> EstimatorState {
    let w = gyro_reading - est.bias_hat;
    let rot = w * dt;
    let dq = UnitQuaternion::from_rotation_vector(&rot);
    // error-state transition for right-multiplicative attitude error
    let mut phi = Mat6::identity();
    phi.fixed_view_mut::<3, 3>(0, 0).copy_from(&dq.to_matrix().transpose());
    phi.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Mat3::identity() * dt));
    let p = phi * est.p * phi.transpose() + process_noise;
    EstimatorState {
        q_hat: est.q_hat * dq,
        bias_hat: est.bias_hat,
        p: symmetrize(&p),
        epoch: est.epoch + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearUpdate<const N: usize, const M: usize> {
    pub x: SVector<f64, N>,
    pub p: SMatrix<f64, N, N>,
    pub gain: SMatrix<f64, N, M>,
    pub innovation: SVector<f64, M>,
    /// Normalized innovation squared νᵀS⁻¹ν.
    pub nis: f64,
}

/// `x̂ = x̂⁻ + K(z − H x̂⁻)`, `K = P Hᵀ (H P Hᵀ + R)⁻¹`, Joseph-form covariance.
pub fn kalman_update<const N: usize, const M: usize>(
    x: &SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    z: &SVector<f64, M>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<LinearUpdate<N, M>> {
    let innovation = z - h * x;
    let s = h * p * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    let gain = p * h.transpose() * s_inv;
    let ikh = SMatrix::<f64, N, N>::identity() - gain * h;
    let p_post = ikh * p * ikh.transpose() + gain * r * gain.transpose();
    Ok(LinearUpdate {
        x: x + gain * innovation,
        p: symmetrize(&p_post),
        gain,
        innovation,
        nis: (innovation.transpose() * s_inv * innovation)[(0, 0)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub state: EstimatorState,
    pub accepted: bool,
    pub nis: f64,
}

/// Innovation ν and observation matrix H of a measurement about `q_hat`.
fn linearize(est: &EstimatorState, kind: &MeasurementKind) -> (Vec3, SMatrix<f64, 3, 6>) {
    let mut h = SMatrix::<f64, 3, 6>::zeros();
    match kind {
        MeasurementKind::StarTracker { attitude } => {
            let nu = (est.q_hat.inverse() * *attitude).to_rotation_vector();
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
            (nu, h)
        }
        MeasurementKind::SunVector { body, reference }
        | MeasurementKind::EarthVector { body, reference }
        | MeasurementKind::MagVector { body, reference } => {
            let predicted = est.q_hat.inverse_rotate(&reference.normalize());
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&predicted));
            // the along-sight part of z − b̂ is second order and unobservable
            let nu = body - predicted;
            (nu - predicted * predicted.dot(&nu), h)
        }
    }
}

/// Multiplicative measurement update with innovation gating.
///
/// A measurement whose Mahalanobis distance √(νᵀS⁻¹ν) exceeds `gate_sigma`
/// is rejected and the estimate returned unchanged.
pub fn ekf_update(est: &EstimatorState, meas: &Measurement, gate_sigma: f64) -> Result<UpdateOutcome> {
    if meas.covariance.cholesky().is_none() {
        return Err(Error::Numerical(
            "measurement covariance is not positive definite".into(),
        ));
    }
    let (nu, h) = linearize(est, &meas.kind);
    // the prior error state is zero, so z is the innovation itself
    let upd = kalman_update(&Vec6::zeros(), &est.p, &nu, &h, &meas.covariance)?;
    if upd.nis.sqrt() > gate_sigma {
        return Ok(UpdateOutcome {
            state: *est,
            accepted: false,
            nis: upd.nis,
        });
    }
    let dth = Vec3::new(upd.x[0], upd.x[1], upd.x[2]);
    let db = Vec3::new(upd.x[3], upd.x[4], upd.x[5]);
    let q_hat = if dth == Vec3::zeros() {
        est.q_hat
    } else {
        est.q_hat * UnitQuaternion::from_rotation_vector(&dth)
    };
    Ok(UpdateOutcome {
        state: EstimatorState {
            q_hat,
            bias_hat: est.bias_hat + db,
            p: upd.p,
            epoch: est.epoch,
        },
        accepted: true,
        nis: upd.nis,
    })
}

/// Symmetric within 1e-9 (relative to the largest entry) and no eigenvalue
/// below −1e-12 relative.
pub fn covariance_is_valid(p: &Mat6) -> bool {
    let scale = p.abs().max().max(f64::MIN_POSITIVE);
    if (p - p.transpose()).abs().max() > 1e-9 * scale {
        return false;
    }
    symmetric_eigen_min(p) >= -1e-12 * scale
}

fn symmetric_eigen_min(p: &Mat6) -> f64 {
    symmetrize(p).symmetric_eigen().eigenvalues.min()
}
