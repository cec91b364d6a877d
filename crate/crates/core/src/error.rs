use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("grid {h}x{w} is not divisible by factor {factor}")]
    NotDivisible { h: usize, w: usize, factor: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid ratio triple ({0}, {1}, {2}): each must lie in [0,1] and sum to 1")]
    InvalidRatios(f64, f64, f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature dimension {got} does not match codebook dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for codebook of {k} codes")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("corpus of {got} vectors is smaller than k = {k}")]
    CorpusTooSmall { k: usize, got: usize },

    #[error("frequency table is already finalized")]
    AlreadyFinalized,

    #[error("frequency table is not finalized")]
    NotFinalized,

    #[error("huffman code length {0} exceeds 64 bits")]
    CodeTooLong(u32),

    #[error("bitstream truncated")]
    Truncated,

    #[error("invalid prefix code walk")]
    InvalidCode,

    #[error("malformed codebook file: {0}")]
    MalformedCodebook(String),

    #[error("malformed container: {0}")]
    MalformedContainer(String),

    #[error("container references codebook {container:016x}, supplied codebook is {codebook:016x}")]
    CodebookMismatch { container: u64, codebook: u64 },
}
