use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vectors are linearly dependent")]
    RankDeficient,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid range: r_min must be below r_max")]
    InvalidRange,
    #[error("ball contains no mass")]
    EmptyBall,
    #[error("cube {0} contains no mass")]
    EmptyCube(usize),
    #[error("cube {0} not found")]
    CubeNotFound(usize),
    #[error("cube {inner} is not contained in cube {outer}")]
    NotNested { inner: usize, outer: usize },
    #[error("intermediate cube {0} is doubling")]
    IntermediateDoubling(usize),
    #[error("tree root {0} is not doubling")]
    NotDoublingRoot(usize),
    #[error("anchors {0} and {1} violate half-aperture cone separation")]
    ConeViolation(usize, usize),
    #[error("anchors {0} and {1} share the same base projection")]
    ProjectionCollision(usize, usize),
    #[error("{n} atoms exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("no direction assigned to atom {0}")]
    MissingDirection(usize),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("eta = 1 - alpha - 3 eps must be positive, got {0}")]
    InvalidEta(f64),
    #[error("Hausdorff hypothesis fails: {found} > {bound}")]
    HypothesisViolated { found: f64, bound: f64 },
    #[error("graph lives in R^{graph}, measure in R^{measure}")]
    GraphAmbientMismatch { graph: usize, measure: usize },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("exponent must exceed 2, got {0}")]
    InvalidExponent(f64),
    #[error("non-positive weight {weight} at row {row}")]
    InvalidWeight { row: usize, weight: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
