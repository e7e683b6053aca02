use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector is numerically zero")]
    ZeroVector,
    #[error("matrix is not positive semidefinite")]
    NotPsd,
    #[error("channels are collinear (collinearity {collinearity:.3e} from 1)")]
    CollinearChannels { collinearity: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("uplink message ({uplink} bits) longer than downlink message ({downlink} bits)")]
    UplinkLongerThanDownlink { uplink: usize, downlink: usize },
    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("power must be positive, got {0}")]
    NonPositivePower(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
