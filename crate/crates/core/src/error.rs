use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("uplink rate must be positive for an offloaded task, got {0}")]
    NonPositiveRate(f64),

    #[error("compute allocation must be positive for an offloaded task, got {0}")]
    NonPositiveCompute(f64),

    #[error("resource allocation needs at least one offloading device")]
    EmptyOffloaders,

    #[error("device {0} has a zero resource share")]
    ZeroShare(usize),

    #[error("candidate position is {excess} m outside the reachable disc")]
    OutsideSpeedBall { excess: f64 },

    #[error("convex subproblem solver stalled: {0}")]
    SolverStalled(String),

    #[error("best response did not reach an equilibrium within {sweeps} sweeps")]
    NoEquilibrium { sweeps: usize, trace: Vec<String> },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
