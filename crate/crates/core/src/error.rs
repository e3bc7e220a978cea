use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("not a projective point")]
    NotProjectivePoint,
    #[error("phi undefined at 0")]
    PhiAtZero,
    #[error("determinant is not 1")]
    DeterminantNotOne,
    #[error("cannot average an empty list of measures")]
    EmptyAverage,
    #[error("weights must be positive and sum to 1")]
    NotProbability,
    #[error("level unknown for ({0}, {1})")]
    LevelUnknown(String, String),
    #[error("window of radius {0} is too small to contain the first level")]
    WindowTooSmall(u64),
    #[error("point excluded from the defect: {0}")]
    ExcludedPoint(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("malformed level table: {0}")]
    LevelTable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
