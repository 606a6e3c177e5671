use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("undefined AOA: target coincides with the receiver")]
    UndefinedAoa,
    #[error("degenerate ellipse-ray intersection")]
    DegenerateEllipseRay,
    #[error("waypoint list is empty")]
    EmptyWaypoints,
    #[error("frame {step} has no direct-path measurement")]
    MissingDirect { step: usize },
    #[error("association problem too large for enumeration: K={k}, M={m}")]
    SizeLimit { k: usize, m: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
