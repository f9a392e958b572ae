use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gNB count {0} exceeds the supported maximum of {max}", max = crate::scenario::MAX_GNBS)]
    TooManyGnbs(usize),
    #[error("points are coincident or closer than {min_m} m", min_m = crate::propagation::MIN_DISTANCE_M)]
    CoincidentPoints,
    #[error("scenario has no nodes")]
    EmptyScenario,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}
