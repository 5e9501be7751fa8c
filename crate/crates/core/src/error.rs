use thiserror::Error;

/// Broad failure classes, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Ingest,
    Configuration,
    Estimation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: required column `{column}` not found in header")]
    Schema { column: String },

    #[error("row error at line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular design: collinear column(s) {columns:?}")]
    SingularDesign { columns: Vec<usize> },

    #[error("empty window: every weight is zero")]
    EmptyWindow,

    #[error("thin window: {left} left / {right} right observations with positive weight, {required} required per side")]
    ThinWindow {
        left: usize,
        right: usize,
        required: usize,
    },

    #[error("zero variance: outcome is constant in the estimation window")]
    ZeroVariance,

    #[error("missing outcome: {0}")]
    MissingOutcome(String),

    #[error("thin sample: {n} observations, at least {required} required")]
    ThinSample { n: usize, required: usize },

    #[error("thin segment: segments of {left} and {right} observations, at least {required} required each")]
    ThinSegment {
        left: usize,
        right: usize,
        required: usize,
    },

    #[error("join error: custom series missing months {missing:?}")]
    Join { missing: Vec<String> },

    #[error("donor pool is empty")]
    EmptyDonorPool,

    #[error("grouping error: {0}")]
    Grouping(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Schema { .. } | Error::Row { .. } | Error::EmptyCorpus | Error::Csv(_) => {
                ErrorClass::Ingest
            }
            Error::Config(_) | Error::Join { .. } | Error::Io(_) => {
                ErrorClass::Configuration
            }
            _ => ErrorClass::Estimation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
