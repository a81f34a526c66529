use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid generator specification: {0}")]
    Spec(String),

    #[error("invalid bit sequence: {0}")]
    Bits(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("terminated trellis of depth {depth} with memory {nu} has no free information bits")]
    NoFreeBits { depth: usize, nu: usize },

    #[error("enumeration of 2^{free_bits} sequences exceeds the cap of 2^{cap}")]
    EnumerationTooLarge { free_bits: usize, cap: usize },

    #[error("depth {depth} outside 1..={last}")]
    DepthOutOfRange { depth: usize, last: usize },

    #[error("depth {depth} carries no information bit (last information depth is {last})")]
    NotInformationDepth { depth: usize, last: usize },

    #[error("symbol index {index} outside 1..={n0}")]
    SymbolOutOfRange { index: usize, n0: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("branch set at depth {depth} has zero posterior mass in the denominator")]
    Unreachable { depth: usize },

    #[error("parameter guard violated: {0}")]
    Guard(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
