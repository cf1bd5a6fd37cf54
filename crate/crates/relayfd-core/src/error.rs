use thiserror::Error;

/// Errors produced by signal generation, detectors and the ICA pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Sampling rate too low for the requested frequency content.
    #[error("aliasing: sampling rate {fs_hz} Hz cannot represent {freq_hz} Hz (need fs > 2*f)")]
    Aliasing { fs_hz: f64, freq_hz: f64 },

    /// A parameter or configuration violated its documented invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough samples to perform the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Matrix dimensions do not match between model and data.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input carries no variance (all-zero or constant); nothing to whiten.
    #[error("no variance in input data")]
    NoVariance,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A waveform CSV or scenario file failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
