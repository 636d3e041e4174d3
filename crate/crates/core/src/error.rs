use thiserror::Error;

use crate::softfp::F32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("non-finite binary32 operand")]
    NonFinite,
    #[error("binary32 overflow")]
    Overflow,
    #[error("rational value outside the finite binary32 range")]
    OutOfRange,
    #[error("invalid floating-point literal `{0}`")]
    Parse(String),
    #[error("literal `{0}` is not exactly representable in binary32")]
    NotRepresentable(String),
    #[error("precision ceiling of {bits} bits reached at {at}")]
    PrecisionCeiling { bits: u32, at: F32 },
    #[error("no acceptable output at {0}")]
    EmptyBracket(F32),
    #[error("coefficient `{0}` is not fixed")]
    Unfixed(String),
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("invalid skeleton: {0}")]
    Skeleton(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
