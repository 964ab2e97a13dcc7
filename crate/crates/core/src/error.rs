use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse `{0}` as a number")]
    Parse(String),
    #[error("value {0} lies outside [0, 1]")]
    OutOfUnitInterval(String),
    #[error("invalid interval [{lo}, {hi})")]
    InvalidInterval { lo: String, hi: String },
    #[error("invalid piecewise-constant function: {0}")]
    InvalidFunction(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("branch {0} has zero slope")]
    ZeroSlope(usize),
    #[error("graded preimage index out of range: k={k}, l={l} (max multiplicity {m})")]
    GradeOutOfRange { k: usize, l: usize, m: usize },
    #[error("piece budget exceeded: {pieces} pieces > budget {budget}")]
    PieceBudget { pieces: usize, budget: usize },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("alpha {0} lies outside [1/3, 2/3]")]
    AlphaOutOfRange(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("finite system has {n} points, above the enumeration cap {cap}")]
    EnumerationCap { n: usize, cap: usize },
    #[error("finite system is singular: a positive-weight point reaches a null point")]
    Singular,
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
