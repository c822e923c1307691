use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ChordError>;

#[derive(Debug, Error)]
pub enum ChordError {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid light: {0}")]
    InvalidLight(String),

    #[error("resolution mismatch: {what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    ResolutionMismatch {
        what: &'static str,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("color space mismatch: {0}")]
    ColorSpace(&'static str),

    #[error("degenerate normal: encoded value decodes to magnitude {0:.2e}")]
    DegenerateNormal(f64),

    #[error("no shading signal: irradiance is zero everywhere")]
    NoShadingSignal,

    #[error("predictor failed at step `{step}`: {message}")]
    Predictor { step: &'static str, message: String },

    #[error("non-finite gradient at pixel ({x}, {y}) for parameter `{param}`")]
    NonFiniteGradient { x: usize, y: usize, param: &'static str },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl ChordError {
    pub(crate) fn mismatch(what: &'static str, got: (usize, usize), want: (usize, usize)) -> Self {
        ChordError::ResolutionMismatch {
            what,
            got_w: got.0,
            got_h: got.1,
            want_w: want.0,
            want_h: want.1,
        }
    }
}
