use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("REJECT_SPEC: {check}: {detail}")]
    RejectSpec { check: &'static str, detail: String },

    #[error("GRID_TOO_SMALL: need at least {needed} nodes, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("SINGULAR_SYSTEM: {0}")]
    SingularSystem(String),

    #[error("STEP_DIVERGED: fixed-point iteration failed at x = {x} after {iterations} iterations (update {update:e})")]
    StepDiverged { x: f64, iterations: usize, update: f64 },

    #[error("POSITIVITY_LOST: minimum {min} at x = {x}")]
    PositivityLost { x: f64, min: f64 },

    #[error("NON_MONOTONE_MAP: inverse map not increasing at x = {x}")]
    NonMonotoneMap { x: f64 },

    #[error("DOMAIN_TOO_SHORT: {0}")]
    DomainTooShort(String),

    #[error("STATION_SINGULAR: station system singular at x = {x}")]
    StationSingular { x: f64 },

    #[error("POSITIVITY_VIOLATED: background velocity minimum {min} at x = {x}")]
    PositivityViolated { x: f64, min: f64 },

    #[error("GRID_MISMATCH: {0}")]
    GridMismatch(String),

    #[error("PARITY_CONFLICT: odd field has value {value:e} on the midline")]
    ParityConflict { value: f64 },

    #[error("NEWTON_DIVERGED: residual {residual:e} after {iterations} iterations and continuation")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn reject(check: &'static str, detail: impl Into<String>) -> Self {
        Error::RejectSpec { check, detail: detail.into() }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RejectSpec { .. } => "REJECT_SPEC",
            Error::GridTooSmall { .. } => "GRID_TOO_SMALL",
            Error::SingularSystem(_) => "SINGULAR_SYSTEM",
            Error::StepDiverged { .. } => "STEP_DIVERGED",
            Error::PositivityLost { .. } => "POSITIVITY_LOST",
            Error::NonMonotoneMap { .. } => "NON_MONOTONE_MAP",
            Error::DomainTooShort(_) => "DOMAIN_TOO_SHORT",
            Error::StationSingular { .. } => "STATION_SINGULAR",
            Error::PositivityViolated { .. } => "POSITIVITY_VIOLATED",
            Error::GridMismatch(_) => "GRID_MISMATCH",
            Error::ParityConflict { .. } => "PARITY_CONFLICT",
            Error::NewtonDiverged { .. } => "NEWTON_DIVERGED",
            Error::InvalidField(_) => "INVALID_FIELD",
            Error::Io(_) => "IO",
            Error::Json(_) => "REJECT_SPEC",
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RejectSpec { .. } | Error::Json(_) => 2,
            Error::Io(_) => 64,
            _ => 3,
        }
    }
}
