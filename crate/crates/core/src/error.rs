use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or incompatible shapes.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    /// A non-finite value appeared; `op` names the operation or phase.
    #[error("numerical error in {op}: {detail}")]
    Numerical { op: String, detail: String },

    /// The requested operation is not offered by this object (e.g. a density
    /// query on a sampling-only teacher).
    #[error("capability error: {0}")]
    Capability(String),

    #[error("load error: {0}")]
    Load(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn numerical(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            op: op.into(),
            detail: detail.into(),
        }
    }

    /// Prefix the operation of a numerical error with a phase name.
    pub fn in_phase(self, phase: &str) -> Self {
        match self {
            Error::Numerical { op, detail } => Error::Numerical {
                op: format!("{phase}/{op}"),
                detail,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
