use thiserror::Error;

/// Errors raised by the burst DSP chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block length {0}: must be a power of two and at least 8")]
    InvalidBlockLength(usize),

    #[error("invalid preamble spec: {0}")]
    InvalidPreamble(String),

    #[error("invalid frame spec: {0}")]
    InvalidFrame(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("bit count {0} is not a multiple of 4")]
    BitCount(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("input too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("frame synchronization failed: best PMNR {pmnr_db:.2} dB below threshold {threshold_db:.2} dB")]
    SyncFailed { pmnr_db: f64, threshold_db: f64 },

    #[error("reference matrix singular at bin {bin}")]
    SingularReference { bin: usize },

    #[error("no pilot within one period of the block")]
    NoPilotInRange,

    #[error("input of {len} samples is not aligned to {block}-sample blocks")]
    BlockAlignment { len: usize, block: usize },

    #[error("unknown sweep parameter '{0}'")]
    UnknownParameter(String),

    #[error("waveform file: bad magic")]
    BadMagic,

    #[error("waveform file: unsupported version {0}")]
    VersionMismatch(u32),

    #[error("waveform file: truncated payload (expected {expected} bytes, got {actual})")]
    Truncated { expected: usize, actual: usize },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBlockLength(_) => "invalid_block_length",
            Error::InvalidPreamble(_) => "invalid_preamble",
            Error::InvalidFrame(_) => "invalid_frame",
            Error::InvalidSignal(_) => "invalid_signal",
            Error::BitCount(_) => "bit_count",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooShort { .. } => "too_short",
            Error::SyncFailed { .. } => "sync_failed",
            Error::SingularReference { .. } => "singular_reference",
            Error::NoPilotInRange => "no_pilot_in_range",
            Error::BlockAlignment { .. } => "block_alignment",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::BadMagic => "bad_magic",
            Error::VersionMismatch(_) => "version_mismatch",
            Error::Truncated { .. } => "truncated",
            Error::Trial { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
