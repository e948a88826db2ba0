use thiserror::Error;

/// Errors raised by the navigation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("latitude {0} rad is outside [-pi/2, pi/2]")]
    LatitudeOutOfRange(f64),
    #[error("curvilinear transform is singular at latitude {0} rad")]
    PolarSingularity(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("rejected IMU sample: step {dt} s is outside (0, {max}] s")]
    InvalidTimeStep { dt: f64, max: f64 },
    #[error("latest IMU sample is {age} s older than the measurement (limit {max} s)")]
    StaleImu { age: f64, max: f64 },
    #[error("no IMU sample available for a rate-dependent measurement")]
    MissingImu,
    #[error("covariance is not positive definite")]
    CovarianceNotPositiveDefinite,
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
    #[error("attitude difference is a rotation by pi; logarithm is ambiguous")]
    AnglePiDegenerate,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("filter is not initialized")]
    NotInitialized,
    #[error("event at t = {t} s is out of order (previous {previous} s)")]
    OutOfOrder { t: f64, previous: f64 },
}

pub type Result<T> = std::result::Result<T, NavError>;
