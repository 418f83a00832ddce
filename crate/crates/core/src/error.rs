use thiserror::Error;

/// Errors raised anywhere along the stimulus, datapath and measurement chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty bit stream requested")]
    EmptyStream,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("resampling at t = {position:.3} samples falls outside the waveform ({extent} samples)")]
    Truncation { position: f64, extent: usize },

    #[error("degenerate input power")]
    DegenerateInputPower,

    #[error("stream of {len} samples is shorter than one {needed}-sample block")]
    ShortStream { len: usize, needed: usize },

    #[error("buffer overflow: writing {incoming} samples would clobber unread data (fill {fill}, capacity {capacity})")]
    BufferOverflow {
        incoming: usize,
        fill: usize,
        capacity: usize,
    },

    #[error("integer delay slew exceeded: |dm| = {delta} > {limit}")]
    SlewExceeded { delta: i32, limit: u32 },

    #[error("expected {expected} samples, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("no eye: decision stream is constant")]
    NoEye,

    #[error("too few decided bits: {got} < {needed}")]
    TooFewBits { got: usize, needed: usize },

    #[error("degenerate SNDR fit: {0}")]
    DegenerateFit(&'static str),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
