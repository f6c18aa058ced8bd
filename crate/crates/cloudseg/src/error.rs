//! Error type shared across the crate.
//!
//! Every error belongs to one of three categories which map onto the CLI
//! exit-code contract: validation errors (exit 1), I/O errors (exit 2) and
//! numerical failures (exit 3).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("insufficient pixels: need at least 2 rows, got {0}")]
    InsufficientPixels(usize),

    #[error("invalid stack: {0}")]
    InvalidStack(String),

    #[error("degenerate ground truth: mask contains a single class")]
    DegenerateGroundTruth,

    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),

    #[error("model/feature channel mismatch: model uses {model:?}, features carry {features:?}")]
    ChannelMismatch { model: String, features: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("empty manifest")]
    EmptyManifest,

    #[error("manifest entry {entry}: {problem}")]
    BadManifestEntry { entry: String, problem: String },

    #[error("training requires masks: entry {0} has none")]
    MissingMask(String),

    #[error("non-binary mask {path}: value {value} (pass --binarize-gt to accept)")]
    NonBinaryMask { path: String, value: u8 },

    #[error("model version mismatch: expected {expected}, found {found}")]
    ModelVersion { expected: u32, found: u32 },

    #[error("output exists: {} (use --force to overwrite)", .0.display())]
    OutputExists(PathBuf),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    ImageCodec {
        path: String,
        #[source]
        source: image::ImageError,
    },

    // serde_json errors carry line/column; include byte-level context too.
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<String>, source: &serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            line: source.line(),
            column: source.column(),
            message: source.to_string(),
        }
    }

    /// Exit-code category: 1 validation, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidChannel(_) | InsufficientPixels(_) | InvalidStack(_) | ChannelMismatch { .. }
            | DimensionMismatch(_) | InvalidArgument(_) | InvalidImage(_) | EmptyManifest
            | BadManifestEntry { .. } | MissingMask(_) | NonBinaryMask { .. }
            | ModelVersion { .. } => 1,
            OutputExists(_) | FileNotFound(_) | Io { .. } | ImageCodec { .. } | Json { .. } => 2,
            DegenerateGroundTruth | DegenerateFeature(_) | Numerical(_) => 3,
        }
    }

    /// Machine-parsable code word used in CLI error lines.
    pub fn code(&self) -> &'static str {
        match self.exit_code() {
            1 => "validation",
            2 => "io",
            _ => "numerical",
        }
    }
}
