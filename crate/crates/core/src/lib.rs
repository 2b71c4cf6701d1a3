//! Noisy quantum circuit simulation by trajectory unraveling.

pub mod angles;
pub mod channel;
pub mod circuits;
pub mod error;
pub mod factorize;
pub mod harness;
pub mod local;
pub mod oracle;
pub mod pauli;
pub mod quadrature;
pub mod sampler;
pub mod state;

pub use error::{Error, Result};
