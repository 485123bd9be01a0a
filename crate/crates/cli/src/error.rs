//! Command-line errors and their exit codes.

use forced_waves::bounds::BoundsError;
use forced_waves::model::ModelError;
use forced_waves::shift::ShiftError;
use forced_waves::sim::SimError;
use forced_waves::wave::WaveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("solver failure: {0}")]
    Solver(String),
    /// Already printed; carries the exit code.
    #[error("exit status {0}")]
    Reported(u8),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Reported(code) => *code,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::StandingAssumption { .. } | ModelError::NoRealRoots { .. } => {
                CliError::Hypothesis(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ShiftError> for CliError {
    fn from(e: ShiftError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::HypothesisViolation { .. } | BoundsError::SpeedRegimeMismatch { .. } => {
                CliError::Hypothesis(e.to_string())
            }
            BoundsError::Model(m) => m.into(),
            BoundsError::Shift(s) => s.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<WaveError> for CliError {
    fn from(e: WaveError) -> Self {
        match e {
            WaveError::InvalidGrid { .. }
            | WaveError::GridTooCoarse { .. }
            | WaveError::SeedMismatch { .. } => CliError::Config(e.to_string()),
            WaveError::HypothesisViolation { .. } | WaveError::GammaOutOfRange { .. } => {
                CliError::Hypothesis(e.to_string())
            }
            WaveError::EnvelopeUnverified(_) => CliError::Verification(e.to_string()),
            WaveError::Bounds(b) => b.into(),
            WaveError::Model(m) => m.into(),
            WaveError::Shift(s) => s.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::PrerequisiteViolation(_) => CliError::Hypothesis(e.to_string()),
            SimError::InvalidTimeStep { .. } | SimError::GridMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            SimError::Wave(w) => w.into(),
            SimError::Bounds(b) => b.into(),
            SimError::Model(m) => m.into(),
            SimError::Shift(s) => s.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}
