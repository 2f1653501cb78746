use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variant names double as the invariant names reported by the CLI, so keep
/// them stable.
#[derive(Debug, Error)]
pub enum MatteError {
    #[error("OutOfRangeValue: value {value} at index {index} is outside [0, 1]")]
    OutOfRangeValue { index: usize, value: f64 },

    #[error("ShapeMismatch: {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("NonBinaryValue: value {value} at index {index} is neither 0 nor 1")]
    NonBinaryValue { index: usize, value: f64 },

    #[error("ZeroDimension: requested {height}x{width}")]
    ZeroDimension { height: usize, width: usize },

    #[error("UnsupportedChannels: {0} channels (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("EmptyMask: the foreground mask selects no pixels")]
    EmptyMask,

    #[error("EmptyBackground: the mask complement selects no pixels")]
    EmptyBackground,

    #[error("ImageTooSmall: {height}x{width} is below the {min}x{min} minimum")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("ChannelMismatch: {context}: expected {expected} channels, found {found}")]
    ChannelMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("OddSplit: cannot split {0} channels into two equal halves")]
    OddSplit(usize),

    #[error("InvalidTensor: {0}")]
    InvalidTensor(String),

    #[error("MissingPrediction: no prediction for record `{id}` at {}", path.display())]
    MissingPrediction { id: String, path: PathBuf },

    #[error("ManifestParse: line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("WeightFile: line {line}: {message}")]
    WeightFile { line: usize, message: String },

    #[error("MissingWeight: no array named `{0}`")]
    MissingWeight(String),

    #[error("Config: {0}")]
    Config(String),

    #[error("ImageDecode: {}: {message}", path.display())]
    ImageDecode { path: PathBuf, message: String },

    #[error("Io: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MatteError {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        MatteError::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MatteError::Io {
            path: path.into(),
            source,
        }
    }

    /// The invariant or error-kind name, e.g. `"OutOfRangeValue"`.
    pub fn kind(&self) -> &'static str {
        match self {
            MatteError::OutOfRangeValue { .. } => "OutOfRangeValue",
            MatteError::ShapeMismatch { .. } => "ShapeMismatch",
            MatteError::NonBinaryValue { .. } => "NonBinaryValue",
            MatteError::ZeroDimension { .. } => "ZeroDimension",
            MatteError::UnsupportedChannels(_) => "UnsupportedChannels",
            MatteError::EmptyMask => "EmptyMask",
            MatteError::EmptyBackground => "EmptyBackground",
            MatteError::ImageTooSmall { .. } => "ImageTooSmall",
            MatteError::ChannelMismatch { .. } => "ChannelMismatch",
            MatteError::OddSplit(_) => "OddSplit",
            MatteError::InvalidTensor(_) => "InvalidTensor",
            MatteError::MissingPrediction { .. } => "MissingPrediction",
            MatteError::ManifestParse { .. } => "ManifestParse",
            MatteError::WeightFile { .. } => "WeightFile",
            MatteError::MissingWeight(_) => "MissingWeight",
            MatteError::Config(_) => "Config",
            MatteError::ImageDecode { .. } => "ImageDecode",
            MatteError::Io { .. } => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, MatteError>;

/// Non-fatal conditions attached to an otherwise valid result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// The unknown-region mask was empty, so a masked loss is vacuously 0.
    EmptyUnknown,
    /// No pixel is fully opaque in both mattes, so connectivity is defined as 0.
    NoFullyOpaqueRegion,
}

/// A scalar result together with an optional warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub warning: Option<Warning>,
}

impl Scored {
    pub fn ok(value: f64) -> Self {
        Scored {
            value,
            warning: None,
        }
    }

    pub fn warn(value: f64, warning: Warning) -> Self {
        Scored {
            value,
            warning: Some(warning),
        }
    }
}
