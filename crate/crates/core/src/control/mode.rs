use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModeKind {
    NominalPointing,
    MomentumDump,
    SafeHold,
}

impl ModeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NominalPointing => "NOMINAL_POINTING",
            Self::MomentumDump => "MOMENTUM_DUMP",
            Self::SafeHold => "SAFE_HOLD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMode {
    pub kind: ModeKind,
    pub entered_at: f64,
    pub reason: String,
}

impl ControlMode {
    pub fn nominal(epoch: f64) -> Self {
        Self {
            kind: ModeKind::NominalPointing,
            entered_at: epoch,
            reason: "initial".into(),
        }
    }

    fn to(kind: ModeKind, epoch: f64, reason: impl Into<String>) -> Self {
        Self {
            kind,
            entered_at: epoch,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundCommand {
    ResumeNominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisorConfig {
    /// Body-rate magnitude that forces safe hold (rad/s).
    pub rate_limit: f64,
    /// Wheel momentum |h|, as a fraction of capacity, that starts a dump.
    pub dump_enter_fraction: f64,
    /// Fraction below which a dump ends.
    pub dump_exit_fraction: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            rate_limit: 1f64.to_radians(),
            dump_enter_fraction: 0.8,
            dump_exit_fraction: 0.1,
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_limit > 0.0) {
            return Err(Error::invalid("supervisor.rate_limit", "must be positive"));
        }
        if !(0.0 < self.dump_exit_fraction && self.dump_exit_fraction < self.dump_enter_fraction) {
            return Err(Error::invalid(
                "supervisor.dump_exit_fraction",
                "must be positive and below dump_enter_fraction",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupervisorInput {
    pub epoch: f64,
    pub estimator_diverged: bool,
    pub wheel_fault: bool,
    /// |ω| (rad/s).
    pub rate: f64,
    /// |h| / h_max, with h_max the per-axis wheel capacity.
    pub wheel_momentum_fraction: f64,
    pub ground_command: Option<GroundCommand>,
}

/// Advances the mode state machine.
///
/// Edges: NOMINAL ↔ DUMP on wheel-momentum thresholds, any → SAFE on a fault
/// or over-rate, SAFE → NOMINAL only on a ground command.
pub fn mode_supervisor(current: &ControlMode, input: &SupervisorInput, cfg: &SupervisorConfig) -> ControlMode {
    let t = input.epoch;
    if current.kind == ModeKind::SafeHold {
        return match input.ground_command {
            Some(GroundCommand::ResumeNominal) => ControlMode::to(ModeKind::NominalPointing, t, "ground command"),
            None => current.clone(),
        };
    }
    if input.wheel_fault {
        return ControlMode::to(ModeKind::SafeHold, t, "wheel fault");
    }
    if input.estimator_diverged {
        return ControlMode::to(ModeKind::SafeHold, t, "estimator divergence");
    }
    if !(input.rate <= cfg.rate_limit) {
        return ControlMode::to(
            ModeKind::SafeHold,
            t,
            format!("rate {:.3} deg/s over limit", input.rate.to_degrees()),
        );
    }
    match current.kind {
        ModeKind::NominalPointing if input.wheel_momentum_fraction >= cfg.dump_enter_fraction => {
            ControlMode::to(ModeKind::MomentumDump, t, "wheel momentum high")
        }
        ModeKind::MomentumDump if input.wheel_momentum_fraction <= cfg.dump_exit_fraction => {
            ControlMode::to(ModeKind::NominalPointing, t, "wheel momentum unloaded")
        }
        _ => current.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn healthy(epoch: f64) -> SupervisorInput {
        SupervisorInput {
            epoch,
            rate: 1e-4,
            wheel_momentum_fraction: 0.3,
            ..Default::default()
        }
    }

    #[test]
    fn healthy_nominal_stays_nominal() {
        let cfg = SupervisorConfig::default();
        let m = ControlMode::nominal(0.0);
        assert_eq!(mode_supervisor(&m, &healthy(5.0), &cfg), m);
    }

    #[test]
    fn wheel_fault_forces_safe_hold() {
        let cfg = SupervisorConfig::default();
        for start in [ModeKind::NominalPointing, ModeKind::MomentumDump] {
            let m = ControlMode::to(start, 0.0, "x");
            let next = mode_supervisor(
                &m,
                &SupervisorInput {
                    wheel_fault: true,
                    ..healthy(3.0)
                },
                &cfg,
            );
            assert_eq!(next.kind, ModeKind::SafeHold);
            assert_eq!(next.reason, "wheel fault");
            assert_eq!(next.entered_at, 3.0);
        }
    }

    #[test]
    fn divergence_and_over_rate_force_safe_hold() {
        let cfg = SupervisorConfig::default();
        let m = ControlMode::nominal(0.0);
        let d = mode_supervisor(
            &m,
            &SupervisorInput {
                estimator_diverged: true,
                ..healthy(1.0)
            },
            &cfg,
        );
        assert_eq!(d.kind, ModeKind::SafeHold);
        let r = mode_supervisor(
            &m,
            &SupervisorInput {
                rate: 0.1,
                ..healthy(1.0)
            },
            &cfg,
        );
        assert_eq!(r.kind, ModeKind::SafeHold);
        let nan = mode_supervisor(
            &m,
            &SupervisorInput {
                rate: f64::NAN,
                ..healthy(1.0)
            },
            &cfg,
        );
        assert_eq!(nan.kind, ModeKind::SafeHold);
    }

    #[test]
    fn safe_hold_exits_only_on_command() {
        let cfg = SupervisorConfig::default();
        let safe = ControlMode::to(ModeKind::SafeHold, 0.0, "wheel fault");
        assert_eq!(mode_supervisor(&safe, &healthy(10.0), &cfg), safe);
        let back = mode_supervisor(
            &safe,
            &SupervisorInput {
                ground_command: Some(GroundCommand::ResumeNominal),
                ..healthy(11.0)
            },
            &cfg,
        );
        assert_eq!(back.kind, ModeKind::NominalPointing);
    }

    #[test]
    fn dump_hysteresis() {
        let cfg = SupervisorConfig::default();
        let m = ControlMode::nominal(0.0);
        let d = mode_supervisor(
            &m,
            &SupervisorInput {
                wheel_momentum_fraction: 0.85,
                ..healthy(1.0)
            },
            &cfg,
        );
        assert_eq!(d.kind, ModeKind::MomentumDump);
        let still = mode_supervisor(
            &d,
            &SupervisorInput {
                wheel_momentum_fraction: 0.5,
                ..healthy(2.0)
            },
            &cfg,
        );
        assert_eq!(still.kind, ModeKind::MomentumDump);
        let done = mode_supervisor(
            &d,
            &SupervisorInput {
                wheel_momentum_fraction: 0.1,
                ..healthy(3.0)
            },
            &cfg,
        );
        assert_eq!(done.kind, ModeKind::NominalPointing);
    }

    #[test]
    fn names_are_stable() {
        assert_eq!(ModeKind::SafeHold.as_str(), "SAFE_HOLD");
        assert_eq!(
            serde_json::to_string(&ModeKind::MomentumDump).unwrap(),
            "\"MOMENTUM_DUMP\""
        );
    }
}
