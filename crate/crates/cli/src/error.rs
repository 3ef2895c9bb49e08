use thiserror::Error;
use tllsize::cpwa::CpwaError;
use tllsize::dynamics::DynamicsError;
use tllsize::geometry::GeometryError;
use tllsize::sizing::SizingError;
use tllsize::tll::TllError;

/// Failures that stop a command before it can produce a report.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration, schema errors, unreadable files.
    #[error("config error: {0}")]
    Config(String),
    /// Oracle failures, singular systems, non-finite states.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<SizingError> for CliError {
    fn from(e: SizingError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CpwaError> for CliError {
    fn from(e: CpwaError) -> Self {
        match e {
            CpwaError::Geometry(g) => g.into(),
            CpwaError::Schema(_) | CpwaError::ShapeMismatch(_) | CpwaError::InvariantViolation(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<TllError> for CliError {
    fn from(e: TllError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NonFiniteState { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
