use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: requested tolerance {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("point {point:?} is at a box edge or corner where the outward normal is undefined")]
    UndefinedNormal { point: Vec<f64> },

    #[error("erosion by r = {radius} is empty")]
    EmptyErosion { radius: f64 },

    #[error("evaluation offset {offset:?} leaves the bounding region of the realization")]
    OutsideBoundingRegion { offset: Vec<f64> },

    #[error("covariance factorization failed even after diagonal jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("Levy measure has infinite mass above truncation level {epsilon}; choose a larger truncation")]
    InfiniteMass { epsilon: f64 },

    #[error("integrand is not finite at node {index}")]
    NonFiniteIntegrand { index: usize },

    #[error("gradient DX requires a finite-variation realization: {0}")]
    InfiniteVariation(String),

    #[error("partition unresolved: refinement moved the KS distance by {distance:.4} (> {threshold}); use finer cells")]
    UnresolvedPartition { distance: f64, threshold: f64 },

    #[error("derivative sampler refused: {0}")]
    FubiniCondition(String),

    #[error("sample set is empty")]
    EmptySample,

    #[error("sample contains a non-finite value at index {0}")]
    NonFiniteSample(usize),

    #[error("statistic must be strictly positive, got {value} at radius {radius}")]
    NonPositiveStatistic { radius: f64, value: f64 },

    #[error("too few exceedances for tail estimation: {0}")]
    TooFewExceedances(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
