use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration field is missing, malformed or out of range.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("noise strength must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("operation requires a noise strength but the system has none")]
    MissingEpsilon,

    #[error("grid size {got} is below the minimum {min}")]
    GridTooSmall { got: usize, min: usize },

    #[error("invalid landscape samples: {0}")]
    InvalidLandscape(String),

    #[error("quadrature did not converge: {0}")]
    NotConverged(String),

    /// The drift has a multiple zero (saddle-node), where the asymptotics change character.
    #[error("degenerate drift zero near theta = {theta:.12}")]
    Degenerate { theta: f64 },

    #[error("the system is in the limit-cycle regime and has no fixed points")]
    NoFixedPoints,

    #[error("the system has stable fixed points; a limit-cycle quantity was requested")]
    NotLimitCycle,

    #[error("index {index} out of range for {len} attractors")]
    BadIndex { index: usize, len: usize },

    #[error("attractors {from} and {to} are not adjacent")]
    NotAdjacent { from: usize, to: usize },

    #[error("chain needs at least {min} states, got {got}")]
    TooFewStates { got: usize, min: usize },

    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),

    #[error("the chain is reducible")]
    Reducible,

    #[error("exponents are not available for this chain")]
    MissingExponents,

    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}
