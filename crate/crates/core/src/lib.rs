//! Mission analysis and simulation for a MEO navigation satellite: launch
//! Δv budgeting, LEO→MEO transfer planning, perturbed orbit propagation,
//! attitude determination and control, station-keeping and constellation
//! coverage.
//!
//! Units are SI throughout (m, s, kg, rad, N·m, T) unless a name says
//! otherwise (`_deg`, `_km`).

// `!(x > 0.0)` is how inputs reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attitude;
pub mod constellation;
pub mod control;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod math;
pub mod orbit;
pub mod stationkeeping;
pub mod transfer;

pub use error::{Error, Result};
pub use math::{Mat3, UnitQuaternion, Vec3};
pub use orbit::{BodyConstants, KeplerianElements, PerturbationConfig, StateVector};

/// Standard gravity used for Isp ↔ exhaust-velocity conversion (m/s²).
pub const G0: f64 = 9.80665;
