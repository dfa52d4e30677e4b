//! Error types shared across the simulator.

/// Simulator-wide error type.
///
/// Almost every failure is a configuration problem (mismatched sample grids,
/// invalid parameter ranges, scheme mismatches); internal errors indicate a
/// broken invariant inside the pipeline itself.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        SimError::Internal(msg.into())
    }
}
