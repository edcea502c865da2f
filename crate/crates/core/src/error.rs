use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coarse classification used for CLI exit codes and machine-readable error output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Config,
    Integration,
    Domain,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Integration => 3,
            ErrorCategory::Domain => 4,
        }
    }
}

/// Where an integration stopped when it could not finish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastState {
    pub t: f64,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("point |x| = {radius:e} lies inside the origin guard r_min = {r_min:e}")]
    Domain { radius: f64, r_min: f64 },

    #[error("speed {speed} is not below the speed of light c = {c}")]
    Superluminal { speed: f64, c: f64 },

    #[error("effective attraction coefficient {alpha_hat} is not positive")]
    NonPositiveAttraction { alpha_hat: f64 },

    #[error(
        "L^2 = {l_squared} does not exceed m*beta_hat = {m_beta}: orbit spirals into the origin"
    )]
    SpiralRegime { l_squared: f64, m_beta: f64 },

    #[error("orbit denominator 1 + e cos(k(theta - theta0)) = {denominator} is not positive")]
    Asymptote { denominator: f64 },

    #[error("state energy {actual} does not match the requested level {expected}")]
    EnergyMismatch { expected: f64, actual: f64 },

    #[error("state is in region {found}, expected {expected}")]
    Region { expected: String, found: String },

    #[error("clock column is not strictly increasing at sample {index}")]
    NonMonotoneClock { index: usize },

    #[error("need at least {needed} perihelion events, found {found}")]
    InsufficientEvents { needed: usize, found: usize },

    #[error("maximum number of steps ({max_steps}) exceeded at t = {}", last.t)]
    MaxStepsExceeded { max_steps: usize, last: LastState },

    #[error("step size {dt:e} collapsed below the underflow limit at t = {}", last.t)]
    StepUnderflow { dt: f64, last: LastState },

    #[error("trajectory left the domain (|x| < r_min = {r_min:e}) after t = {}", last.t)]
    DomainExit { r_min: f64, last: LastState },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::EnergyMismatch { .. } => {
                ErrorCategory::Config
            }
            Error::MaxStepsExceeded { .. }
            | Error::StepUnderflow { .. }
            | Error::NonMonotoneClock { .. }
            | Error::InsufficientEvents { .. }
            | Error::Io(_) => ErrorCategory::Integration,
            Error::Domain { .. }
            | Error::Superluminal { .. }
            | Error::NonPositiveAttraction { .. }
            | Error::SpiralRegime { .. }
            | Error::Asymptote { .. }
            | Error::Region { .. }
            | Error::DomainExit { .. } => ErrorCategory::Domain,
        }
    }

    /// Short stable identifier, used in JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::Config(_) => "Config",
            Error::Domain { .. } => "Domain",
            Error::Superluminal { .. } => "Superluminal",
            Error::NonPositiveAttraction { .. } => "NonPositiveAttraction",
            Error::SpiralRegime { .. } => "SpiralRegime",
            Error::Asymptote { .. } => "AsymptoteError",
            Error::EnergyMismatch { .. } => "EnergyMismatch",
            Error::Region { .. } => "RegionError",
            Error::NonMonotoneClock { .. } => "NonMonotoneClock",
            Error::InsufficientEvents { .. } => "InsufficientEvents",
            Error::MaxStepsExceeded { .. } => "MaxStepsExceeded",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::DomainExit { .. } => "DomainExit",
            Error::Io(_) => "Io",
        }
    }

    pub fn last_state(&self) -> Option<&LastState> {
        match self {
            Error::MaxStepsExceeded { last, .. }
            | Error::StepUnderflow { last, .. }
            | Error::DomainExit { last, .. } => Some(last),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
