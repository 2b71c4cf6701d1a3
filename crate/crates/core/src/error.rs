use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("parameter out of domain: {0}")]
    OutOfDomain(String),

    #[error("singular channel: Pauli fidelity of {string} is {value:e}, cannot factorize")]
    SingularChannel { string: String, value: f64 },

    #[error("non-physical factorization: q_{string} = {value:e} lies outside [0, 1/2); use the random-rotation sampler instead")]
    NonPhysical { string: String, value: f64 },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
