use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("bit width mismatch: {0} vs {1}")]
    WidthMismatch(u8, u8),
    #[error("bit width {0} out of range (must be 1..=64)")]
    InvalidWidth(u8),
    #[error("value {0} outside the signed range of Z_q for l={1}")]
    SignedRange(i64, u8),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("quantization overflow in {place}: |{value}| >= 2^{{l-1}} for l={l}")]
    QuantizeOverflow { place: String, value: f64, l: u8 },
    #[error("state outside the declared domain: component {index} is {value}, half-width {limit}")]
    DomainViolation {
        index: usize,
        value: f64,
        limit: f64,
    },
    #[error("Beaver triple {0} already consumed")]
    TripleReused(u64),
    #[error("ran out of provisioned Beaver triples")]
    TriplesExhausted,
    #[error("circuit build error: {0}")]
    CircuitBuild(String),
    #[error("missing assignment for wire {0}")]
    UnassignedWire(usize),
    #[error("garbled evaluation failed: {0}")]
    GarbleEvaluation(String),
    #[error("malformed garbled circuit: {0}")]
    GarbleFormat(String),
    #[error("oblivious transfer failed: {0}")]
    ObliviousTransfer(String),
    #[error("protocol error at step {step}: {message}")]
    Protocol { step: u32, message: String },
    #[error("offline setup rejected: {0}")]
    Setup(String),
    #[error("overflow certificate not satisfied: {0}")]
    Uncertified(String),
    #[error("malformed file: {0}")]
    FileFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
