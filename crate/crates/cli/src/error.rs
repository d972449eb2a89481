use std::fmt;

use aigem::graph::GraphError;
use aigem::model::ModelError;
use aigem::traj::TrajError;
use aigem::train::TrainError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad flags, config file or argument values.
    Usage = 1,
    /// Missing, unreadable or unusable input data.
    Data = 2,
    /// Training produced a non-finite loss.
    Divergence = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: ExitKind::Usage, error: e.into() }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: ExitKind::Data, error: e.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self { kind: self.kind, error: self.error.context(msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<TrajError> for CliError {
    fn from(e: TrajError) -> Self {
        match e {
            TrajError::Argument(_) | TrajError::Scenario(_) | TrajError::UnknownEgo(_) => Self::usage(e),
            _ => Self::data(e),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Self::data(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Shape(_) | ModelError::Argument(_) => Self::usage(e),
            _ => Self::data(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } => Self { kind: ExitKind::Divergence, error: e.into() },
            TrainError::Argument(_) => Self::usage(e),
            TrainError::Model(inner) => inner.into(),
            TrainError::Data(inner) => inner.into(),
            _ => Self::data(e),
        }
    }
}

/// Attaches a message to a fallible result while choosing its exit class.
pub trait ResultExt<T> {
    fn data_ctx(self, msg: impl FnOnce() -> String) -> Result<T>;
    fn usage_ctx(self, msg: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for std::result::Result<T, E> {
    fn data_ctx(self, msg: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| CliError::data(e).context(msg()))
    }

    fn usage_ctx(self, msg: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| CliError::usage(e).context(msg()))
    }
}
