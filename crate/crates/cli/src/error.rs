use std::fmt;

use dse_core::cluster::ClusterError;
use dse_core::compare::CompareError;
use dse_core::data::DataError;
use dse_core::inference::InferenceError;
use dse_core::io::IoError;
use dse_core::merge::MergeError;
use dse_core::model::ModelError;

/// Process exit status by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Usage = 2,
    Data = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self::new(Failure::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self::new(Failure::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn numerical(msg: impl fmt::Display) -> Self {
        Self::new(Failure::Numerical, anyhow::anyhow!("{msg}"))
    }

    fn new(kind: Failure, error: anyhow::Error) -> Self {
        Self { kind, error }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(ctx),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Failure::Data, e.into())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::new(Failure::Data, e.into())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::new(Failure::Data, e.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::new(Failure::Numerical, e.into())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        let kind = match &e {
            InferenceError::Config(_) | InferenceError::Prior(_) => Failure::Usage,
            InferenceError::UnknownParameter(_) | InferenceError::Dimension(_) | InferenceError::EmptySeries => {
                Failure::Data
            }
            _ => Failure::Numerical,
        };
        Self::new(kind, e.into())
    }
}

impl From<MergeError> for CliError {
    fn from(e: MergeError) -> Self {
        match e {
            MergeError::TooFewGames(_) | MergeError::Partition(_) => Self::new(Failure::Usage, e.into()),
            MergeError::Inference(inner) => inner.into(),
            MergeError::Block { block, source } => CliError::from(source).context(format!("block {block}")),
            _ => Self::new(Failure::Numerical, e.into()),
        }
    }
}

impl From<CompareError> for CliError {
    fn from(e: CompareError) -> Self {
        let kind = match e {
            CompareError::NonFinite { .. } => Failure::Numerical,
            _ => Failure::Data,
        };
        Self::new(kind, e.into())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        let kind = match e {
            ClusterError::NonFinite(..) => Failure::Numerical,
            _ => Failure::Data,
        };
        Self::new(kind, e.into())
    }
}
