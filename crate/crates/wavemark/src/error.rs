use std::io;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any wavemark operation.
#[derive(Debug, Error)]
pub enum Error {
    /// The byte stream is not a parseable RIFF/WAVE container.
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    /// The WAV container is valid but not 16-bit integer PCM.
    #[error("unsupported WAV format code {0} (only PCM, code 1, is supported)")]
    UnsupportedWavFormat(u16),
    #[error("unsupported bit depth {0} (only 16-bit PCM is supported)")]
    UnsupportedBitDepth(u16),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("samples must be finite (found NaN or infinity)")]
    NonFiniteSample,

    #[error("length {len} is not divisible by 2^{levels}")]
    BadTransformLength { len: usize, levels: usize },
    #[error("inconsistent pyramid: {0}")]
    InconsistentPyramid(String),

    #[error("expected {expected} coefficients, got {got}")]
    WrongCoefficientCount { expected: usize, got: usize },
    #[error("sequences have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input where at least {min} elements are required")]
    TooShort { min: usize },

    #[error("LFSR degree {0} is too small (need at least 2)")]
    BadLfsrDegree(u32),
    #[error("no primitive polynomial table entry for LFSR degree {0}")]
    UnsupportedLfsrDegree(u32),

    #[error("coefficient block is degenerate (all magnitudes below {eps:e})")]
    DegenerateBlock { eps: f64 },
    #[error("audio too short: {got} samples, need at least {needed} for one frame")]
    AudioTooShort { needed: usize, got: usize },
    #[error("payload must contain at least one bit")]
    EmptyPayload,
    #[error("every frame of the audio is degenerate; nothing was embedded")]
    AllFramesDegenerate,

    #[error("no synchronization code found")]
    NoSyncFound,

    #[error("reference signal is all zero")]
    AllZeroReference,
    #[error("signal to normalize is all zero")]
    AllZeroSignal,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("report serialization failed: {0}")]
    Report(#[from] serde_json::Error),
}
