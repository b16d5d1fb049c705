use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A point fell outside the declared domain of a function or chart.
    #[error("coordinate {coordinate} = {value} outside domain: {reason}")]
    Domain {
        coordinate: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Successive quadrature refinements kept growing.
    #[error("integral diverges (last refinement ratio {ratio:.3})")]
    Divergent { ratio: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
