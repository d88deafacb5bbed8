use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("control and target qubits must differ (both {0})")]
    InvalidGate(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot generate {requested} parameters from {capacity} basis states")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("step called on a finished episode")]
    EpisodeFinished,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("discount factor must lie in [0, 1], got {0}")]
    InvalidGamma(f64),

    #[error("non-finite gradient in {0}")]
    PoisonedGradient(&'static str),

    #[error("synchronization round received no gradient packets")]
    EmptyRound,

    #[error("synchronization protocol violation: {0}")]
    Protocol(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
