use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are kept fine-grained so callers (and the
/// CLI) can report the exact failure class.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    DimensionMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    #[error("length mismatch in {op}: {lhs} vs {rhs}")]
    LengthMismatch {
        op: &'static str,
        lhs: usize,
        rhs: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse manifest {path}: {message}")]
    ManifestParse { path: PathBuf, message: String },

    #[error(
        "video {video_id}: {path} holds {actual} bytes, expected {expected} \
         ({rows}x{cols} little-endian f32)"
    )]
    PayloadSize {
        video_id: String,
        path: PathBuf,
        expected: u64,
        actual: u64,
        rows: usize,
        cols: usize,
    },

    #[error("video {video_id}: non-finite value in {field} at flat index {index}")]
    NonFinite {
        video_id: String,
        field: String,
        index: usize,
    },

    #[error("video {video_id}: score in {field} at index {index} is {value}, outside [0, 1]")]
    ScoreOutOfRange {
        video_id: String,
        field: String,
        index: usize,
        value: f64,
    },

    #[error("video {video_id}: segments leave a gap at frame {frame}")]
    SegmentGap { video_id: String, frame: usize },

    #[error("video {video_id}: segment {index} [{start}, {end}) overlaps the previous segment")]
    SegmentOverlap {
        video_id: String,
        index: usize,
        start: usize,
        end: usize,
    },

    #[error("video {video_id}: {message}")]
    InvalidRecord { video_id: String, message: String },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used by the CLI to prefix error messages.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => "shape",
            Error::Config(_) | Error::EmptyInput(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::Io { .. } | Error::Checkpoint { .. } => "io",
            Error::ManifestParse { .. }
            | Error::PayloadSize { .. }
            | Error::NonFinite { .. }
            | Error::ScoreOutOfRange { .. }
            | Error::SegmentGap { .. }
            | Error::SegmentOverlap { .. }
            | Error::InvalidRecord { .. } => "data",
        }
    }
}
