use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row} sums to {sum}, not 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("malformed table: {0}")]
    Shape(String),
    #[error("symbol {symbol} is outside an alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sequence length {len} is not divisible by block length {block}")]
    LengthNotDivisible { len: usize, block: usize },
    #[error("codeword at position {position} is not in the active code")]
    UnknownCodeword { position: usize },
    #[error("bitstream parse failure at bit {bit}: {reason}")]
    ParseFailure { bit: usize, reason: String },
    #[error("invalid prefix code: {0}")]
    InvalidCode(String),
    #[error("invalid machine: {0}")]
    InvalidMachine(String),
    #[error("enumeration size {estimate} exceeds budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u128 },
    #[error("table of {entries} entries exceeds the cap of {cap}")]
    TableTooLarge { entries: u128, cap: u128 },
    #[error("composition rank does not fit in 64 bits")]
    RankOverflow,
    #[error("header does not match the stream parameters: {0}")]
    HeaderMismatch(String),
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("brute-force cap exceeded: {0}")]
    CapExceeded(String),
    #[error("distortion level {delta} is below the minimum cost {min}")]
    InfeasibleDelta { delta: f64, min: f64 },
    #[error("codebook of 2^{bits} words exceeds the cap")]
    CodebookTooLarge { bits: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
