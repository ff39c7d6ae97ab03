use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported orbit: {0}")]
    UnsupportedOrbit(String),

    #[error("singular geometry: {0}")]
    Singularity(String),

    #[error("trajectory impacted the Earth at t = {t:.3} s")]
    Impact { t: f64 },

    #[error("integration failed at t = {t:.6} s: non-finite derivative")]
    IntegrationFailure { t: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Riccati synthesis did not converge after {iterations} iterations (residual {residual:e})")]
    Synthesis { iterations: usize, residual: f64 },

    #[error("deviation outside the linear trim regime: {0}; replan the insertion")]
    OutOfRange(String),

    #[error("magnetic field too weak for dumping (|B| = {0:e} T)")]
    DegenerateField(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("propellant exhausted: needed {needed_kg:.4} kg, {available_kg:.4} kg remaining")]
    FuelDepleted { needed_kg: f64, available_kg: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("launch budget short: net {net_dv:.1} m/s against {required_dv:.1} m/s required")]
    BudgetShortfall { net_dv: f64, required_dv: f64 },

    #[error("insertion gate failed and cannot be trimmed: {0}")]
    GateFailure(String),
}

impl Error {
    /// Stable machine-readable code for error lines and tallies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UnsupportedOrbit(_) => "unsupported_orbit",
            Error::Singularity(_) => "singularity",
            Error::Impact { .. } => "impact",
            Error::IntegrationFailure { .. } => "integration_failure",
            Error::Configuration(_) => "configuration",
            Error::Numerical(_) => "numerical",
            Error::Synthesis { .. } => "synthesis",
            Error::OutOfRange(_) => "out_of_range",
            Error::DegenerateField(_) => "degenerate_field",
            Error::InsufficientData(_) => "insufficient_data",
            Error::FuelDepleted { .. } => "fuel_depleted",
            Error::Parse(_) => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
            Error::BudgetShortfall { .. } => "budget_shortfall",
            Error::GateFailure(_) => "gate_failure",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
