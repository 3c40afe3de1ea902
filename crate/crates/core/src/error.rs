use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^dag| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("result has non-real trace: |Im| = {imag:e}")]
    NonRealResult { imag: f64 },

    #[error("input out of range at index {index}: {value} not in [{lo}, {hi}]")]
    RangeViolation {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("operation requires a reservoir without ancilla qubits (n_ancilla = {n_ancilla})")]
    AncillaPresent { n_ancilla: usize },

    #[error("operator set is not Hilbert-Schmidt orthogonal: |tr(M_{k} M_{l})| = {overlap:e}")]
    NotOrthogonal { k: usize, l: usize, overlap: f64 },

    #[error("bad magic number: expected {expected:#010x}, got {got:#010x}")]
    BadMagic { expected: u32, got: u32 },

    #[error("file truncated: expected {expected} bytes, got {got}")]
    TruncatedFile { expected: usize, got: usize },

    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("invalid configuration field `{field}`: {message}")]
    ValidationError { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ValidationError {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Machine-readable exit code class for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParseError { .. } | Error::ValidationError { .. } => 2,
            Error::Io(_) => 3,
            Error::BadMagic { .. }
            | Error::TruncatedFile { .. }
            | Error::CountMismatch { .. } => 4,
            _ => 5,
        }
    }
}
