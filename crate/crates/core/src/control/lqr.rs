//! LQR gain synthesis for small-angle attitude error about zero body rate.
//!
//! State x = (e, ω), input u = body torque:
//! `ẋ = A x + B u` with `A = [[0, I], [0, 0]]`, `B = [[0], [J⁻¹]]`.
//! Gyroscopic coupling is left to the closed loop as a disturbance.
//!
//! The Riccati equation is solved by Newton–Kleinman iteration: starting from
//! a stabilizing gain, each step solves the Lyapunov equation
//! `(A − BK)ᵀP + P(A − BK) + Q + KᵀRK = 0` and sets `K = R⁻¹BᵀP`.

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::attitude::InertiaSpec;
use crate::error::{Error, Result};
use crate::math::{Mat3, Mat6, Vec3};

type Mat6x3 = SMatrix<f64, 6, 3>;
pub type Gain = SMatrix<f64, 3, 6>;

const MAX_ITERATIONS: usize = 60;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSpec {
    pub q: Mat6,
    pub r: Mat3,
    pub inertia: InertiaSpec,
}

impl LqrSpec {
    pub fn diagonal(q_att: f64, q_rate: f64, r: f64, inertia: InertiaSpec) -> Self {
        let mut q = Mat6::zeros();
        for k in 0..3 {
            q[(k, k)] = q_att;
            q[(k + 3, k + 3)] = q_rate;
        }
        Self {
            q,
            r: Mat3::identity() * r,
            inertia,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.iter().chain(self.r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("lqr", "weights must be finite"));
        }
        let scale = self.q.abs().max().max(f64::MIN_POSITIVE);
        if (self.q - self.q.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::invalid("lqr.q", "must be symmetric"));
        }
        if self.q.symmetric_eigen().eigenvalues.min() < -1e-12 * scale {
            return Err(Error::invalid("lqr.q", "must be positive semidefinite"));
        }
        if (self.r - self.r.transpose()).abs().max() > 1e-12 * self.r.abs().max() || self.r.cholesky().is_none() {
            return Err(Error::invalid("lqr.r", "must be symmetric positive definite"));
        }
        Ok(())
    }

    fn system(&self) -> (Mat6, Mat6x3) {
        let mut a = Mat6::zeros();
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
        let mut b = Mat6x3::zeros();
        b.fixed_view_mut::<3, 3>(3, 0).copy_from(self.inertia.inverse());
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrGain {
    pub k: Gain,
    /// Stabilizing Riccati solution.
    pub p: Mat6,
    pub residual: f64,
    pub iterations: usize,
}

impl LqrGain {
    /// `u = −K (e, ω)`.
    pub fn torque(&self, error: &Vec3, rate: &Vec3) -> Vec3 {
        let x = nalgebra::Vector6::new(error.x, error.y, error.z, rate.x, rate.y, rate.z);
        -(self.k * x)
    }

    pub fn attitude_block(&self) -> Mat3 {
        self.k.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn rate_block(&self) -> Mat3 {
        self.k.fixed_view::<3, 3>(0, 3).into_owned()
    }
}

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(a: &Mat6, b: &Mat6x3, q: &Mat6, r: &Mat3, p: &Mat6) -> f64 {
    let r_inv = r.try_inverse().unwrap_or_else(|| Mat3::from_element(f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Solves `AcᵀP + P·Ac = −M` through the 36×36 Kronecker system.
fn lyapunov(ac: &Mat6, m: &Mat6) -> Option<Mat6> {
    let at = ac.transpose();
    let n = 6;
    let mut big = DMatrix::<f64>::zeros(n * n, n * n);
    // column-major vec: vec(AᵀP) = (I ⊗ Aᵀ)vec(P), vec(PA) = (Aᵀ ⊗ I)vec(P)
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                big[(j * n + i, j * n + k)] += at[(i, k)];
                big[(j * n + i, k * n + i)] += at[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, m.iter().map(|v| -v));
    let sol = big.lu().solve(&rhs)?;
    let p = Mat6::from_iterator(sol.iter().copied());
    Some((p + p.transpose()) * 0.5)
}

fn is_hurwitz(m: &Mat6) -> bool {
    m.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

pub fn lqr_gain(spec: &LqrSpec) -> Result<LqrGain> {
    spec.validate()?;
    let (a, b) = spec.system();
    let r_inv = spec
        .r
        .try_inverse()
        .ok_or_else(|| Error::invalid("lqr.r", "must be invertible"))?;
    let j = spec.inertia.matrix;
    // K0 = J[I, 2I] places every axis at a double pole at −1
    let mut k = Gain::zeros();
    k.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    k.fixed_view_mut::<3, 3>(0, 3).copy_from(&(j * 2.0));

    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let ac = a - b * k;
        let m = spec.q + k.transpose() * spec.r * k;
        let next = lyapunov(&ac, &m).ok_or(Error::Synthesis {
            iterations: it,
            residual,
        })?;
        let k_next = r_inv * b.transpose() * next;
        let step = (k_next - k).norm() / k_next.norm().max(f64::MIN_POSITIVE);
        let p = next;
        k = k_next;
        residual = care_residual(&a, &b, &spec.q, &spec.r, &p);
        if !residual.is_finite() {
            break;
        }
        if residual < RESIDUAL_TOL && step < 1e-12 {
            if !is_hurwitz(&(a - b * k)) {
                return Err(Error::Numerical("LQR closed loop is not Hurwitz".into()));
            }
            return Ok(LqrGain {
                k,
                p,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::Synthesis {
        iterations: MAX_ITERATIONS,
        residual,
    })
}
