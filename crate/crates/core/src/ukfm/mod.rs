//! Unscented Kalman filtering on manifolds.

pub mod nav;
pub mod unscented;

pub use nav::{
    heading_rotation, inverse_retract, retract, Covariance, ErrorVector, FilterConfig, InitialUncertainty, UpdateReport,
    Ukfm, MAX_IMU_AGE, STATE_DIM,
};
pub use unscented::{Manifold, SigmaPoints, SigmaWeights, UpdateOutcome};
