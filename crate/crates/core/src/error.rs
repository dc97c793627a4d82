use std::path::PathBuf;

use thiserror::Error;

use crate::format::EnvFormat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{format:?} requires {expected}, got {width}x{height}")]
    InvalidAspect {
        format: EnvFormat,
        width: usize,
        height: usize,
        expected: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative radiance {value} at pixel ({x}, {y}) channel {channel}")]
    NegativeRadiance {
        x: usize,
        y: usize,
        channel: usize,
        value: f32,
    },

    #[error("non-finite value at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },

    #[error("image has no valid pixels")]
    EmptyRegion,

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("image is tonemapped ({0}); operation requires linear radiance")]
    CompressedInput(String),

    #[error("image is linear; operation requires a tonemapped image")]
    LinearInput,

    #[error("value {value} at pixel ({x}, {y}) is outside the inverse domain of {op}")]
    OutOfRange {
        op: String,
        x: usize,
        y: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{method} requires an integer power-of-two downsampling factor, got {from} -> {to}")]
    NonPowerOfTwo {
        method: &'static str,
        from: usize,
        to: usize,
    },

    #[error("malformed {kind} data: {msg}")]
    Decode { kind: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoRaw(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn decode(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Decode {
            kind,
            msg: msg.into(),
        }
    }
}
