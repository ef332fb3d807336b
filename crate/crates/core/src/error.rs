use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands from different groups, or an element that is not a member of the group.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    /// A norm was requested for an element outside the tabulated ball.
    #[error("{element} lies outside the ball of radius {radius}")]
    OutOfRange { element: String, radius: u32 },

    /// A support escaped the available norm range at step `step`.
    #[error("support of step {step} escapes the norm table (radius {radius})")]
    SupportEscapes { step: usize, radius: u32 },

    /// Cylinder level too shallow for the requested quantity.
    #[error("cylinder level {level} too shallow, need at least {required}")]
    LevelTooShallow { level: usize, required: usize },

    #[error("memory budget of {budget} elements exceeded while building radius {radius}")]
    Resource { budget: usize, radius: u32 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}
