use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("positions are not an equilibrium (force residual {residual:.3e})")]
    NotEquilibrium { residual: f64 },

    #[error("negative curvature eigenvalue {eigenvalue:.6e}: configuration is not crystallized")]
    NotCrystallized { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state enumeration budget of {cap} states exceeded")]
    BudgetExceeded { cap: u64 },

    #[error("truncated final-state sum reached completeness {achieved:.12} (needed {required:.12})")]
    TruncationInsufficient { achieved: f64, required: f64 },

    #[error("shell centred at {energy} contains no states")]
    EmptyShell { energy: f64 },

    #[error("no axial cooling component (cos_theta0 = 0)")]
    NoAxialCooling,

    #[error("no stationary distribution (blue detuning or no axial projection)")]
    NoSteadyState,

    #[error("mode {mode} is heated (A- = {cooling:.6e} <= A+ = {heating:.6e}); steady state undefined")]
    HeatingRegime { mode: usize, heating: f64, cooling: f64 },

    #[error("emission pattern is not normalized (integral {integral:.9})")]
    UnnormalizedPattern { integral: f64 },

    #[error("time step {dt:.6e} exceeds stability bound {bound:.6e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("density fell to {value:.3e} in shell {shell} at t = {time:.6e}")]
    NegativeDensity { shell: usize, value: f64, time: f64 },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, shared by the CLI and the C interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NotEquilibrium { .. } => "not_equilibrium",
            Error::NotCrystallized { .. } => "not_crystallized",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::TruncationInsufficient { .. } => "truncation_insufficient",
            Error::EmptyShell { .. } => "empty_shell",
            Error::NoAxialCooling => "no_axial_cooling",
            Error::NoSteadyState => "no_steady_state",
            Error::HeatingRegime { .. } => "heating_regime",
            Error::UnnormalizedPattern { .. } => "unnormalized_pattern",
            Error::CflViolation { .. } => "cfl_violation",
            Error::NegativeDensity { .. } => "negative_density",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
