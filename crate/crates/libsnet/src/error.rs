use thiserror::Error;

/// Errors produced by dataset handling, model I/O and the numeric pipeline.
///
/// Shape mismatches inside the low-level layer kernels are treated as
/// programmer error and panic via `assert!`; everything that can be caused
/// by user data or files comes back through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(&'static str),

    #[error("length mismatch in {context}: expected {expected}, got {got}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("element `{0}` not present in emission line database")]
    UnknownElement(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("cannot split by target: {0}")]
    CannotSplitByTarget(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("model/config mismatch: expected {expected}, file has {found}")]
    ConfigMismatch { expected: String, found: String },

    #[error("missing label: {0}")]
    MissingLabel(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse classification used by the CLI to pick an exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
