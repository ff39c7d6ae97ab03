//! Closed attitude loop: truth dynamics, sensors, MEKF, mode supervisor,
//! controller and actuators, stepped at a fixed `dt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::telemetry::TelemetryRecord;
use crate::attitude::{
    dipole_field, magnetorquer_torque, step_attitude, AppliedTorques, InertiaSpec, MagnetorquerSpec, RigidBodyState,
    ThrusterTorqueSpec, WheelSpec,
};
use crate::control::{
    attitude_error, lqr_gain, mode_supervisor, momentum_dump_command, nadir_target, pid_torque, safe_hold_torque,
    target_rate, ControlMode, GroundCommand, LqrGain, LqrSpec, ModeKind, PidGains, SafeHoldGains, SupervisorConfig,
    SupervisorInput,
};
use crate::error::{Error, Result};
use crate::estimation::{
    covariance_is_valid, ekf_predict, ekf_update, simulate_measurements, EstimatorState, GyroState, MeasurementKind,
    ReferenceVectors, SensorSuite, SensorsDue, DEFAULT_GATE_SIGMA, DEG_PER_HOUR,
};
use crate::math::{is_finite_vec, UnitQuaternion, Vec3};
use crate::orbit::{orbital_period, propagate, state_to_elements, BodyConstants, PerturbationConfig, StateVector};
use crate::stationkeeping::FuelBudget;

pub const FLAG_WHEEL_SAT: &str = "WHEEL_SAT";
pub const FLAG_MEAS_REJECTED: &str = "MEAS_REJECTED";
pub const FLAG_EST_DIVERGED: &str = "EST_DIVERGED";
pub const FLAG_WHEEL_FAULT: &str = "WHEEL_FAULT";
pub const FLAG_WEAK_FIELD: &str = "WEAK_FIELD";
pub const FLAG_THRUSTING: &str = "THRUSTING";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    /// Per-axis PD from a bandwidth and damping ratio.
    Pd { omega_n: f64, zeta: f64 },
    /// PD plus a clamped integral; `ki = ki_ratio·ωn·kp`.
    Pid {
        omega_n: f64,
        zeta: f64,
        ki_ratio: f64,
        integrator_limit: f64,
    },
    /// LQR with diagonal weights on attitude error, rate and torque.
    Lqr { q_attitude: f64, q_rate: f64, r: f64 },
    /// Explicit PID gains.
    Gains { gains: PidGains },
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::Pid {
            omega_n: 0.05,
            zeta: 1.0,
            ki_ratio: 0.2,
            integrator_limit: 0.05,
        }
    }
}

/// Runtime controller with its own integrator state.
#[derive(Debug, Clone)]
pub enum Controller {
    Pid { gains: PidGains, integral: Vec3 },
    Lqr(Box<LqrGain>),
}

impl Controller {
    pub fn build(cfg: &ControllerConfig, inertia: &InertiaSpec) -> Result<Self> {
        let gains = match *cfg {
            ControllerConfig::Pd { omega_n, zeta } => PidGains::from_bandwidth(inertia, omega_n, zeta, 0.0),
            ControllerConfig::Pid {
                omega_n,
                zeta,
                ki_ratio,
                integrator_limit,
            } => PidGains {
                integrator_limit,
                ..PidGains::from_bandwidth(inertia, omega_n, zeta, ki_ratio)
            },
            ControllerConfig::Lqr { q_attitude, q_rate, r } => {
                let spec = LqrSpec::diagonal(q_attitude, q_rate, r, *inertia);
                return Ok(Self::Lqr(Box::new(lqr_gain(&spec)?)));
            }
            ControllerConfig::Gains { gains } => gains,
        };
        gains.validate()?;
        Ok(Self::Pid {
            gains,
            integral: Vec3::zeros(),
        })
    }

    /// Body torque demand for attitude error `e` and rate error `rate`.
    pub fn torque(&mut self, e: &Vec3, rate: &Vec3, dt: f64) -> Vec3 {
        match self {
            Self::Pid { gains, integral } => {
                let (tau, next) = pid_torque(e, rate, integral, dt, gains);
                *integral = next;
                tau
            }
            Self::Lqr(g) => g.torque(e, rate),
        }
    }

    pub fn reset(&mut self) {
        if let Self::Pid { integral, .. } = self {
            *integral = Vec3::zeros();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcsConfig {
    pub inertia: InertiaSpec,
    pub sensors: SensorSuite,
    pub controller: ControllerConfig,
    pub wheels: WheelSpec,
    pub magnetorquers: MagnetorquerSpec,
    pub thrusters: ThrusterTorqueSpec,
    pub safe_hold: SafeHoldGains,
    pub supervisor: SupervisorConfig,
    /// Loop step (s).
    pub dt: f64,
    /// Simulated span (s); 0 skips the phase.
    pub duration: f64,
    /// Telemetry row spacing (s).
    pub telemetry_interval: f64,
    /// Pointing statistics ignore the first `settle_time` seconds.
    pub settle_time: f64,
    pub initial_pointing_error_deg: f64,
    pub initial_knowledge_error_deg: f64,
    pub initial_rate: Vec3,
    pub initial_wheel_momentum: Vec3,
    /// Constant body-frame environmental torque (N·m).
    pub disturbance_torque: Vec3,
    /// Momentum-dump gain k (1/s).
    pub dump_gain: f64,
    pub gate_sigma: f64,
    /// Attitude σ (deg) beyond which the estimator is declared diverged.
    pub divergence_sigma_deg: f64,
    /// Consecutive rejected star-tracker fixes that also count as divergence.
    pub max_consecutive_rejections: u32,
    /// Feed the controller the true state instead of the estimate.
    pub perfect_knowledge: bool,
    pub wheel_fault_at: Option<f64>,
    pub resume_command_at: Option<f64>,
}

impl Default for AdcsConfig {
    fn default() -> Self {
        Self {
            inertia: InertiaSpec::diagonal(1200.0, 1000.0, 800.0).expect("valid inertia"),
            sensors: SensorSuite::default(),
            controller: ControllerConfig::default(),
            wheels: WheelSpec::default(),
            magnetorquers: MagnetorquerSpec::default(),
            thrusters: ThrusterTorqueSpec::default(),
            safe_hold: SafeHoldGains::default(),
            supervisor: SupervisorConfig::default(),
            dt: 0.1,
            duration: 7_200.0,
            telemetry_interval: 10.0,
            settle_time: 600.0,
            initial_pointing_error_deg: 2.0,
            initial_knowledge_error_deg: 10.0,
            initial_rate: Vec3::zeros(),
            initial_wheel_momentum: Vec3::zeros(),
            disturbance_torque: Vec3::new(1e-5, -5e-6, 8e-6),
            dump_gain: 2e-3,
            gate_sigma: DEFAULT_GATE_SIGMA,
            divergence_sigma_deg: 20.0,
            max_consecutive_rejections: 10,
            perfect_knowledge: false,
            wheel_fault_at: None,
            resume_command_at: None,
        }
    }
}

impl AdcsConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensors.validate()?;
        self.wheels.validate()?;
        self.magnetorquers.validate()?;
        self.thrusters.validate()?;
        self.safe_hold.validate()?;
        self.supervisor.validate()?;
        for (name, v) in [
            ("dt", self.dt),
            ("telemetry_interval", self.telemetry_interval),
            ("dump_gain", self.dump_gain),
            ("gate_sigma", self.gate_sigma),
            ("divergence_sigma_deg", self.divergence_sigma_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("duration", self.duration),
            ("settle_time", self.settle_time),
            ("initial_pointing_error_deg", self.initial_pointing_error_deg),
            ("initial_knowledge_error_deg", self.initial_knowledge_error_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be ≥ 0"));
            }
        }
        for (name, v) in [
            ("initial_rate", self.initial_rate),
            ("initial_wheel_momentum", self.initial_wheel_momentum),
            ("disturbance_torque", self.disturbance_torque),
        ] {
            if !is_finite_vec(&v) {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.telemetry_interval < self.dt {
            return Err(Error::invalid("telemetry_interval", "must be ≥ dt"));
        }
        if self.max_consecutive_rejections == 0 {
            return Err(Error::invalid("max_consecutive_rejections", "must be ≥ 1"));
        }
        let c = self.controller;
        let bad = match c {
            ControllerConfig::Pd { omega_n, zeta } => !(omega_n > 0.0 && zeta > 0.0),
            ControllerConfig::Pid {
                omega_n,
                zeta,
                ki_ratio,
                integrator_limit,
            } => !(omega_n > 0.0 && zeta > 0.0 && ki_ratio >= 0.0 && integrator_limit > 0.0),
            ControllerConfig::Lqr { q_attitude, q_rate, r } => !(q_attitude > 0.0 && q_rate >= 0.0 && r > 0.0),
            ControllerConfig::Gains { gains } => gains.validate().is_err(),
        };
        if bad {
            return Err(Error::invalid("controller", "gains must be positive"));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    fn every(&self, rate_hz: f64) -> u64 {
        ((1.0 / (rate_hz * self.dt)).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcsSummary {
    pub steps: u64,
    pub duration: f64,
    /// RMS true pointing error over settled NOMINAL samples (deg).
    pub pointing_rms_deg: Option<f64>,
    pub pointing_max_deg: Option<f64>,
    /// RMS knowledge error over the same samples (arcsec).
    pub knowledge_rms_arcsec: Option<f64>,
    pub final_pointing_deg: f64,
    pub final_mode: ModeKind,
    pub transitions: Vec<ControlMode>,
    pub rejected_measurements: u64,
    pub wheel_saturated_steps: u64,
    pub peak_wheel_fraction: f64,
    pub final_wheel_fraction: f64,
    pub thruster_propellant_kg: f64,
    pub dump_steps: u64,
    /// Largest `h·τ_m/(|h||τ_m|)` the dump law commanded (≤ 0 by design).
    pub dump_max_alignment: f64,
    /// |ΔH − ∫τ_ext dt| / max(|H₀|, ∫|τ_ext| dt) for inertial momentum.
    pub momentum_balance_error: f64,
}

#[derive(Debug, Clone)]
pub struct AdcsOutcome {
    pub summary: AdcsSummary,
    pub telemetry: Vec<TelemetryRecord>,
    pub truth: RigidBodyState,
    pub estimate: EstimatorState,
    pub orbit: StateVector,
    pub fuel: FuelBudget,
    pub mode: ControlMode,
}

fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
        if let Some(u) = v.try_normalize(1e-9) {
            return u;
        }
    }
}

fn references(sv: &StateVector, sun: &Vec3, body: &BodyConstants) -> Result<ReferenceVectors> {
    Ok(ReferenceVectors {
        sun: sun.normalize(),
        field: dipole_field(&sv.position, body)?,
        nadir: -sv.position.normalize(),
    })
}

/// Everything except the attitude block of a telemetry row.
pub(crate) struct RowContext<'a> {
    pub orbit: &'a StateVector,
    pub body: &'a BodyConstants,
    pub mode: ModeKind,
    pub fuel_kg: f64,
    pub flags: &'a [&'static str],
}

pub(crate) fn telemetry_row(
    truth: &RigidBodyState,
    est: &EstimatorState,
    tau: &Vec3,
    pointing_err: f64,
    ctx: &RowContext,
) -> Result<TelemetryRecord> {
    let el = state_to_elements(ctx.orbit, ctx.body)?;
    let (q, e) = (truth.q.canonical(), est.q_hat.canonical());
    let mut flags: Vec<&str> = ctx.flags.to_vec();
    flags.sort_unstable();
    flags.dedup();
    Ok(TelemetryRecord {
        epoch_s: ctx.orbit.epoch,
        qw: q.w,
        qx: q.x,
        qy: q.y,
        qz: q.z,
        wx: truth.omega.x,
        wy: truth.omega.y,
        wz: truth.omega.z,
        est_qw: e.w,
        est_qx: e.x,
        est_qy: e.y,
        est_qz: e.z,
        est_bx: est.bias_hat.x,
        est_by: est.bias_hat.y,
        est_bz: est.bias_hat.z,
        hx: truth.wheel_momentum.x,
        hy: truth.wheel_momentum.y,
        hz: truth.wheel_momentum.z,
        tau_x: tau.x,
        tau_y: tau.y,
        tau_z: tau.z,
        a_m: el.a,
        e: el.e,
        i_deg: el.i.to_degrees(),
        raan_deg: el.raan.to_degrees(),
        argp_deg: el.argp.to_degrees(),
        true_anomaly_deg: el.true_anomaly.to_degrees(),
        pointing_err_deg: pointing_err.to_degrees(),
        mode: ctx.mode.as_str().to_string(),
        fuel_kg: ctx.fuel_kg,
        flags: flags.join("|"),
    })
}

/// Runs the closed loop from `orbit` (whose epoch is the start time).
///
/// Per step: sample the sensors due now, update the filter, run the mode
/// supervisor, compute the mode's actuator commands from the estimate,
/// integrate truth attitude and orbit over `dt`, then propagate the filter
/// with the held gyro reading.
pub fn run_adcs<R: Rng + ?Sized>(
    cfg: &AdcsConfig,
    body: &BodyConstants,
    perturbations: &PerturbationConfig,
    orbit: &StateVector,
    fuel: &FuelBudget,
    rng: &mut R,
) -> Result<AdcsOutcome> {
    cfg.validate()?;
    let dt = cfg.dt;
    let t0 = orbit.epoch;
    let sun = perturbations
        .sun_direction
        .try_normalize(0.0)
        .ok_or_else(|| Error::Configuration("sun direction must be non-zero".into()))?;
    let h_max = cfg.wheels.max_momentum;
    let mut controller = Controller::build(&cfg.controller, &cfg.inertia)?;

    let gyro_every = cfg.every(cfg.sensors.sample_rates.gyro);
    let st_every = cfg.every(cfg.sensors.sample_rates.star_tracker);
    let sun_every = cfg.every(cfg.sensors.sample_rates.sun_sensor);
    let earth_every = cfg.every(cfg.sensors.sample_rates.earth_sensor);
    let mag_every = cfg.every(cfg.sensors.sample_rates.magnetometer);
    let tel_every = ((cfg.telemetry_interval / dt).round() as u64).max(1);
    let settle_step = (cfg.settle_time / dt).round() as u64;
    let steps = cfg.steps();

    let mut sv = *orbit;
    let mut q_target = nadir_target(&sv.position, &sv.velocity, &sun)?;
    let pointing_axis = random_axis(rng);
    let knowledge_axis = random_axis(rng);
    let mut truth = RigidBodyState {
        q: q_target * UnitQuaternion::from_axis_angle(&pointing_axis, cfg.initial_pointing_error_deg.to_radians()),
        omega: cfg.initial_rate,
        wheel_momentum: cfg.initial_wheel_momentum,
        epoch: t0,
    };
    let knowledge = cfg.initial_knowledge_error_deg.to_radians();
    let mut est = EstimatorState::with_sigmas(
        truth.q * UnitQuaternion::from_axis_angle(&knowledge_axis, knowledge),
        knowledge.max(1e-4),
        DEG_PER_HOUR,
        t0,
    );
    let mut gyro = GyroState::new(&cfg.sensors);
    let mut last_gyro: Option<Vec3> = None;
    let q_noise = cfg.sensors.process_noise(dt);
    let mut fuel = *fuel;
    let mut mode = ControlMode::nominal(t0);
    let mut transitions = Vec::new();
    let mut resume_pending = cfg.resume_command_at;
    let mut consecutive_rejections = 0u32;

    let h_start = truth.inertial_momentum(&cfg.inertia);
    let mut torque_integral = Vec3::zeros();
    let mut torque_abs_integral = 0.0;

    let mut telemetry = Vec::with_capacity((steps / tel_every + 2) as usize);
    let mut flags: Vec<&'static str> = Vec::new();
    let mut summary = AdcsSummary {
        steps,
        duration: steps as f64 * dt,
        pointing_rms_deg: None,
        pointing_max_deg: None,
        knowledge_rms_arcsec: None,
        final_pointing_deg: 0.0,
        final_mode: mode.kind,
        transitions: Vec::new(),
        rejected_measurements: 0,
        wheel_saturated_steps: 0,
        peak_wheel_fraction: truth.wheel_momentum.norm() / h_max,
        final_wheel_fraction: 0.0,
        thruster_propellant_kg: 0.0,
        dump_steps: 0,
        dump_max_alignment: f64::NEG_INFINITY,
        momentum_balance_error: 0.0,
    };
    let (mut point_sq, mut know_sq, mut point_max, mut settled_n) = (0.0, 0.0, 0.0f64, 0u64);

    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        truth.epoch = t;
        sv.epoch = t;

        let refs = references(&sv, &sun, body)?;
        let due = SensorsDue {
            gyro: k % gyro_every == 0,
            star_tracker: k % st_every == 0,
            sun_sensor: k % sun_every == 0,
            earth_sensor: k % earth_every == 0,
            magnetometer: k % mag_every == 0,
        };
        let frame = simulate_measurements(&truth, &cfg.sensors, &mut gyro, &refs, due, gyro_every as f64 * dt, rng)?;
        // propagate into this epoch on the mean of the bracketing gyro samples
        if let Some(prev) = last_gyro {
            let rate = frame.gyro.map_or(prev, |g| (prev + g) * 0.5);
            est = ekf_predict(&est, &rate, dt, &q_noise);
            est.epoch = t;
        }
        if let Some(g) = frame.gyro {
            last_gyro = Some(g);
        }
        let mut sun_body_meas = None;
        for m in &frame.measurements {
            let out = ekf_update(&est, m, cfg.gate_sigma)?;
            est = out.state;
            let is_st = matches!(m.kind, MeasurementKind::StarTracker { .. });
            if !out.accepted {
                summary.rejected_measurements += 1;
                flags.push(FLAG_MEAS_REJECTED);
                if is_st {
                    consecutive_rejections += 1;
                }
            } else if is_st {
                consecutive_rejections = 0;
            }
            if let MeasurementKind::SunVector { body, .. } = m.kind {
                sun_body_meas = Some(body);
            }
        }
        if !covariance_is_valid(&est.p) {
            return Err(Error::Numerical(format!(
                "estimator covariance lost definiteness at t = {t}"
            )));
        }

        let (q_know, rate_know) = if cfg.perfect_knowledge {
            (truth.q, truth.omega)
        } else {
            (est.q_hat, last_gyro.unwrap_or_default() - est.bias_hat)
        };

        let diverged = est.attitude_sigma() > cfg.divergence_sigma_deg.to_radians()
            || consecutive_rejections >= cfg.max_consecutive_rejections;
        if diverged {
            flags.push(FLAG_EST_DIVERGED);
        }
        let wheel_fault = cfg.wheel_fault_at.is_some_and(|tf| t >= tf);
        if wheel_fault {
            flags.push(FLAG_WHEEL_FAULT);
        }
        let command = match resume_pending {
            Some(tc) if t >= tc => {
                resume_pending = None;
                Some(GroundCommand::ResumeNominal)
            }
            _ => None,
        };
        let input = SupervisorInput {
            epoch: t,
            estimator_diverged: diverged,
            wheel_fault,
            rate: rate_know.norm(),
            wheel_momentum_fraction: truth.wheel_momentum.norm() / h_max,
            ground_command: command,
        };
        let next_mode = mode_supervisor(&mode, &input, &cfg.supervisor);
        if next_mode.kind != mode.kind {
            controller.reset();
            transitions.push(next_mode.clone());
        }
        mode = next_mode;

        // target at t and t + dt gives the feed-forward rate
        let sv_next = propagate(&sv, dt, dt, perturbations, body)?;
        let q_target_next = nadir_target(&sv_next.position, &sv_next.velocity, &sun)?;
        let w_target = target_rate(q_target, q_target_next, dt);

        let pointing = truth.q.angle_to(q_target);
        if k >= settle_step && mode.kind == ModeKind::NominalPointing {
            point_sq += pointing * pointing;
            point_max = point_max.max(pointing);
            know_sq += est.q_hat.angle_to(truth.q).powi(2);
            settled_n += 1;
        }

        let b_inertial = refs.field;
        let mut wheel_command = Vec3::zeros();
        let mut external = cfg.disturbance_torque;
        let mut control_torque = Vec3::zeros();
        match mode.kind {
            ModeKind::NominalPointing | ModeKind::MomentumDump => {
                let e = attitude_error(q_know, q_target);
                let w_t_body = (q_know.inverse() * q_target).rotate(&w_target);
                let u = controller.torque(&e, &(rate_know - w_t_body), dt);
                if !wheel_fault {
                    wheel_command = -u;
                    control_torque += u;
                }
                if mode.kind == ModeKind::MomentumDump {
                    summary.dump_steps += 1;
                    let b_est = q_know.inverse_rotate(&b_inertial);
                    let h = truth.wheel_momentum;
                    match momentum_dump_command(&h, &b_est, cfg.dump_gain, &cfg.magnetorquers) {
                        Ok(m) => {
                            let commanded = m.cross(&b_est);
                            let scale = h.norm() * commanded.norm();
                            if scale > 0.0 {
                                summary.dump_max_alignment = summary.dump_max_alignment.max(h.dot(&commanded) / scale);
                            }
                            let applied =
                                magnetorquer_torque(&m, &truth.q.inverse_rotate(&b_inertial), &cfg.magnetorquers);
                            external += applied;
                            control_torque += applied;
                        }
                        Err(Error::DegenerateField(_)) => flags.push(FLAG_WEAK_FIELD),
                        Err(e) => return Err(e),
                    }
                }
            }
            ModeKind::SafeHold => {
                let sun_body = sun_body_meas.unwrap_or_else(|| q_know.inverse_rotate(&sun));
                let tau = safe_hold_torque(&sun_body, &rate_know, &cfg.safe_hold, &cfg.thrusters);
                let used = cfg.thrusters.propellant_used(&tau, dt);
                if used > fuel.propellant {
                    return Err(Error::FuelDepleted {
                        needed_kg: used,
                        available_kg: fuel.propellant,
                    });
                }
                if used > 0.0 {
                    flags.push(FLAG_THRUSTING);
                }
                fuel.propellant -= used;
                summary.thruster_propellant_kg += used;
                external += tau;
                control_torque += tau;
            }
        }

        if k % tel_every == 0 {
            let ctx = RowContext {
                orbit: &sv,
                body,
                mode: mode.kind,
                fuel_kg: fuel.propellant,
                flags: &flags,
            };
            telemetry.push(telemetry_row(&truth, &est, &control_torque, pointing, &ctx)?);
            flags.clear();
        }
        summary.final_pointing_deg = pointing.to_degrees();
        if k == steps {
            break;
        }

        let step = step_attitude(
            &truth,
            &cfg.inertia,
            &cfg.wheels,
            &AppliedTorques {
                external,
                wheel_command,
            },
            dt,
        )?;
        if step.wheel_saturated {
            summary.wheel_saturated_steps += 1;
            flags.push(FLAG_WHEEL_SAT);
        }
        // trapezoidal ∫ q·τ_ext dt for the momentum cross-check
        torque_integral += (truth.q.rotate(&external) + step.state.q.rotate(&external)) * (0.5 * dt);
        torque_abs_integral += external.norm() * dt;
        truth = step.state;
        summary.peak_wheel_fraction = summary.peak_wheel_fraction.max(truth.wheel_momentum.norm() / h_max);

        sv = sv_next;
        q_target = q_target_next;
    }

    if settled_n > 0 {
        let n = settled_n as f64;
        summary.pointing_rms_deg = Some((point_sq / n).sqrt().to_degrees());
        summary.pointing_max_deg = Some(point_max.to_degrees());
        summary.knowledge_rms_arcsec = Some((know_sq / n).sqrt().to_degrees() * 3600.0);
    }
    let h_end = truth.inertial_momentum(&cfg.inertia);
    summary.momentum_balance_error =
        (h_end - h_start - torque_integral).norm() / h_start.norm().max(torque_abs_integral).max(f64::MIN_POSITIVE);
    summary.final_mode = mode.kind;
    summary.transitions = transitions;
    summary.final_wheel_fraction = truth.wheel_momentum.norm() / h_max;
    if summary.dump_steps == 0 {
        summary.dump_max_alignment = 0.0;
    }

    Ok(AdcsOutcome {
        summary,
        telemetry,
        truth,
        estimate: est,
        orbit: sv,
        fuel,
        mode,
    })
}

/// Wheel-unloading scenario: wheels start at `start_fraction` of capacity,
/// pointing is perfect, and the loop runs for one orbital period of `orbit`
/// at a 1 s step with no environmental torque.
pub fn momentum_dump_trial(
    cfg: &AdcsConfig,
    body: &BodyConstants,
    orbit: &StateVector,
    start_fraction: f64,
    seed: u64,
) -> Result<AdcsOutcome> {
    let el = state_to_elements(orbit, body)?;
    let period = orbital_period(el.a, body)?;
    let mut h0 = Vec3::new(1.0, -1.0, 1.0).normalize() * (start_fraction * cfg.wheels.max_momentum);
    // land on or just above the requested fraction despite rounding
    while h0.norm() < start_fraction * cfg.wheels.max_momentum {
        h0 *= 1.0 + f64::EPSILON;
    }
    let trial = AdcsConfig {
        dt: 1.0,
        duration: period.ceil(),
        telemetry_interval: 10.0,
        initial_pointing_error_deg: 0.0,
        initial_knowledge_error_deg: 0.0,
        initial_wheel_momentum: h0,
        disturbance_torque: Vec3::zeros(),
        ..cfg.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_adcs(
        &trial,
        body,
        &PerturbationConfig::two_body(),
        orbit,
        &FuelBudget::default(),
        &mut rng,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTrialConfig {
    pub suite: SensorSuite,
    pub initial_error_deg: f64,
    pub duration: f64,
    pub dt: f64,
    /// Constant true body rate (rad/s).
    pub rate: Vec3,
    /// Spacing of recorded epochs (s).
    pub record_interval: f64,
    pub gate_sigma: f64,
}

impl Default for EstimatorTrialConfig {
    fn default() -> Self {
        Self {
            suite: SensorSuite::default(),
            initial_error_deg: 10.0,
            duration: 600.0,
            dt: 0.1,
            rate: Vec3::new(2e-4, -1e-4, 1.5e-4),
            record_interval: 20.0,
            gate_sigma: DEFAULT_GATE_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTrial {
    pub epochs: Vec<f64>,
    /// |δθ| at each recorded epoch (rad).
    pub attitude_error: Vec<f64>,
    /// Six-state NEES at each recorded epoch.
    pub nees: Vec<f64>,
    /// RMS of |δθ| over every step after the first quarter of the run (rad).
    pub steady_rms: f64,
}

/// Open-loop filter run against a body spinning at a constant rate, with a
/// MEO-like field and fixed Sun and nadir references.
pub fn estimator_trial(cfg: &EstimatorTrialConfig, seed: u64) -> Result<EstimatorTrial> {
    cfg.suite.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = cfg.dt;
    let steps = (cfg.duration / dt).round() as u64;
    let every = |hz: f64| ((1.0 / (hz * dt)).round() as u64).max(1);
    let (g_every, st_every) = (
        every(cfg.suite.sample_rates.gyro),
        every(cfg.suite.sample_rates.star_tracker),
    );
    let (sun_every, earth_every, mag_every) = (
        every(cfg.suite.sample_rates.sun_sensor),
        every(cfg.suite.sample_rates.earth_sensor),
        every(cfg.suite.sample_rates.magnetometer),
    );
    let rec_every = ((cfg.record_interval / dt).round() as u64).max(1);
    let steady_from = steps / 4;

    let refs = ReferenceVectors {
        sun: Vec3::new(1.0, -0.5, 0.3).normalize(),
        field: dipole_field(&Vec3::new(26_560e3, 0.0, 0.0), &BodyConstants::EARTH)?,
        nadir: Vec3::new(-0.2, 0.9, -0.3).normalize(),
    };
    let q0 = UnitQuaternion::from_axis_angle(&random_axis(&mut rng), 1.0);
    let mut truth = RigidBodyState {
        omega: cfg.rate,
        ..RigidBodyState::at_rest(q0)
    };
    let err_axis = random_axis(&mut rng);
    let err = cfg.initial_error_deg.to_radians();
    let mut est = EstimatorState::with_sigmas(
        q0 * UnitQuaternion::from_axis_angle(&err_axis, err),
        err.max(1e-4),
        DEG_PER_HOUR,
        0.0,
    );
    let mut gyro = GyroState::new(&cfg.suite);
    let spin = UnitQuaternion::from_rotation_vector(&(cfg.rate * dt));
    let q_noise = cfg.suite.process_noise(dt);

    let mut out = EstimatorTrial {
        epochs: Vec::new(),
        attitude_error: Vec::new(),
        nees: Vec::new(),
        steady_rms: 0.0,
    };
    let (mut sq, mut n) = (0.0, 0u64);
    let mut last_gyro: Option<Vec3> = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        truth.epoch = t;
        let due = SensorsDue {
            gyro: k % g_every == 0,
            star_tracker: k % st_every == 0,
            sun_sensor: k % sun_every == 0,
            earth_sensor: k % earth_every == 0,
            magnetometer: k % mag_every == 0,
        };
        // the bias used by this reading is the one the filter should hold now
        let bias_now = gyro.bias;
        let frame = simulate_measurements(&truth, &cfg.suite, &mut gyro, &refs, due, g_every as f64 * dt, &mut rng)?;
        if let Some(prev) = last_gyro {
            let rate = frame.gyro.map_or(prev, |g| (prev + g) * 0.5);
            est = ekf_predict(&est, &rate, dt, &q_noise);
        }
        if let Some(g) = frame.gyro {
            last_gyro = Some(g);
        }
        for m in &frame.measurements {
            est = ekf_update(&est, m, cfg.gate_sigma)?.state;
        }
        let e = est.q_hat.angle_to(truth.q);
        if k >= steady_from {
            sq += e * e;
            n += 1;
        }
        if k > 0 && k % rec_every == 0 {
            out.epochs.push(t);
            out.attitude_error.push(e);
            out.nees.push(est.nees(truth.q, &bias_now)?);
        }
        if k == steps {
            break;
        }
        truth.q = truth.q * spin;
    }
    out.steady_rms = (sq / n.max(1) as f64).sqrt();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{elements_to_state, KeplerianElements};

    fn meo() -> StateVector {
        let el = KeplerianElements::circular(26_560e3, 55f64.to_radians(), 0.0, 0.3);
        elements_to_state(&el, &BodyConstants::EARTH).unwrap()
    }

    fn short(cfg: AdcsConfig, seed: u64) -> AdcsOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_adcs(
            &cfg,
            &BodyConstants::EARTH,
            &PerturbationConfig::default(),
            &meo(),
            &FuelBudget::default(),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn controller_config_is_tagged() {
        let c: ControllerConfig =
            serde_json::from_str(r#"{"type":"lqr","q_attitude":1,"q_rate":100,"r":100}"#).unwrap();
        assert!(matches!(c, ControllerConfig::Lqr { .. }));
        assert!(serde_json::from_str::<ControllerConfig>(r#"{"type":"pd","omega_n":0.1,"zeta":1,"x":1}"#).is_err());
    }

    #[test]
    fn nominal_loop_converges_and_stays_nominal() {
        let out = short(
            AdcsConfig {
                duration: 900.0,
                settle_time: 450.0,
                ..AdcsConfig::default()
            },
            3,
        );
        let s = &out.summary;
        assert!(s.transitions.is_empty(), "{:?}", s.transitions);
        assert_eq!(s.final_mode, ModeKind::NominalPointing);
        assert!(s.transitions.is_empty());
        assert!(s.pointing_rms_deg.unwrap() < 0.01, "{s:?}");
        assert!(s.knowledge_rms_arcsec.unwrap() < 3.0, "{s:?}");
        assert_eq!(out.telemetry.len(), 91);
        assert!(super::super::telemetry::validate_stream(&out.telemetry).is_ok());
    }

    #[test]
    fn loop_is_deterministic() {
        let cfg = AdcsConfig {
            duration: 60.0,
            ..AdcsConfig::default()
        };
        let a = short(cfg.clone(), 9);
        let b = short(cfg, 9);
        assert_eq!(a.telemetry, b.telemetry);
    }

    #[test]
    fn lqr_loop_converges() {
        let out = short(
            AdcsConfig {
                // kp ≈ Iωn² and kd ≈ 2Iωn at ωn = 0.05 rad/s
                controller: ControllerConfig::Lqr {
                    q_attitude: 6.25,
                    q_rate: 5_000.0,
                    r: 1.0,
                },
                duration: 900.0,
                settle_time: 600.0,
                ..AdcsConfig::default()
            },
            4,
        );
        assert!(out.summary.pointing_rms_deg.unwrap() < 0.05, "{:?}", out.summary);
    }

    #[test]
    fn wheel_fault_enters_safe_hold_and_burns_fuel() {
        let out = short(
            AdcsConfig {
                duration: 300.0,
                wheel_fault_at: Some(100.0),
                resume_command_at: Some(250.0),
                ..AdcsConfig::default()
            },
            5,
        );
        let s = &out.summary;
        assert_eq!(s.transitions[0].kind, ModeKind::SafeHold, "{:?}", s.transitions);
        assert_eq!(s.transitions[0].entered_at, 100.0);
        // the fault persists, so the resume command is overridden next step
        assert_eq!(s.final_mode, ModeKind::SafeHold);
        assert!(s.transitions.iter().any(|m| m.reason == "ground command"));
        assert!(s.thruster_propellant_kg > 0.0);
        assert!((out.fuel.propellant + s.thruster_propellant_kg - 50.0).abs() < 1e-9);
        assert!(out
            .telemetry
            .iter()
            .any(|r| r.has_flag(FLAG_WHEEL_FAULT) && r.mode == "SAFE_HOLD"));
    }

    #[test]
    fn dump_trial_unloads_wheels() {
        let out = momentum_dump_trial(&AdcsConfig::default(), &BodyConstants::EARTH, &meo(), 0.8, 1).unwrap();
        let s = &out.summary;
        assert!(s.dump_steps > 0);
        assert!(s.dump_max_alignment <= 1e-12, "{s:?}");
        assert!(s.final_wheel_fraction < 0.2, "{s:?}");
        assert!(s.momentum_balance_error < 1e-6, "{s:?}");
    }

    #[test]
    fn estimator_trial_converges() {
        let tr = estimator_trial(
            &EstimatorTrialConfig {
                duration: 200.0,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        assert!(tr.steady_rms < 3.0 * crate::estimation::ARCSEC, "{}", tr.steady_rms);
        assert_eq!(tr.epochs.len(), 10);
    }
}
