use alloc::string::String;

/// Errors produced by the SCI numerics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SciError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("truncated payload: needed {needed} bytes, found {found}")]
    TruncatedPayload { needed: usize, found: usize },
    #[error("unsupported tensor rank {0} (maximum is 4)")]
    UnsupportedRank(usize),
    #[error("weight shape mismatch: {0}")]
    WeightShapeMismatch(String),
    #[error("unknown layer kind tag {0}")]
    UnknownLayerKind(u8),
    #[error("ADMM penalty gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("gamma_k = {0} is outside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("latent value {0} lies outside the alphabet [-1, 1]")]
    OutOfAlphabet(f64),
    #[error("dense assembly of {rows}x{cols} exceeds the size guard")]
    TooLarge { rows: usize, cols: usize },
    #[error("crop {size:?} at offset {offset:?} exceeds source {source_dims:?}")]
    CropOutOfBounds { offset: (usize, usize), size: (usize, usize), source_dims: (usize, usize) },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = SciError> = core::result::Result<T, E>;
