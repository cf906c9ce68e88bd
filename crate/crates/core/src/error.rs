use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage an error was raised in, used for attribution in reports
/// and CLI exit messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Center,
    PcaInit,
    Pairs,
    MetricInit,
    Statistics,
    Optimize,
    Embed,
    Classify,
    Export,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Center => "center",
            Stage::PcaInit => "pca-init",
            Stage::Pairs => "pairs",
            Stage::MetricInit => "metric-init",
            Stage::Statistics => "statistics",
            Stage::Optimize => "optimize",
            Stage::Embed => "embed",
            Stage::Classify => "classify",
            Stage::Export => "export",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum IlsError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("rank-deficient matrix in {context}")]
    Singular { context: &'static str },

    #[error("ill-conditioned SPD matrix in {context}: min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e}")]
    Conditioning {
        context: &'static str,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("matrix columns are not orthonormal: |W^T W - I|_F = {0:e}")]
    NotOrthonormal(f64),

    #[error("matrix is not symmetric: max |M - M^T| = {0:e}")]
    NotSymmetric(f64),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("requested latent dimension {requested} exceeds data rank {rank}")]
    InsufficientRank { requested: usize, rank: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: line {line}: {message}")]
    ModelFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<IlsError>,
    },
}

impl IlsError {
    pub(crate) fn shape(context: &'static str, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        IlsError::ShapeMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IlsError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stage the error was attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            IlsError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, IlsError>;

/// Attaches a pipeline stage to an error. Errors already carrying a stage
/// keep the innermost attribution.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ IlsError::Stage { .. } => e,
            e => IlsError::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
