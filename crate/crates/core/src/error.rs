use thiserror::Error;

/// Errors produced by the decoder library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("softmax row {0} is fully masked")]
    FullyMasked(usize),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid precision plan `{plan}`: {reason}")]
    Plan { plan: String, reason: String },

    #[error("invalid frame: {0}")]
    Frame(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decoding failures for the on-disk weight and frame containers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("truncated input: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),

    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),

    #[error("tensor `{name}` stored as {found}, plan requires {expected}")]
    DtypeMismatch {
        name: String,
        expected: String,
        found: String,
    },

    #[error("malformed: {0}")]
    Malformed(String),

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
