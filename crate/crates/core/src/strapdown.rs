//! Strapdown integration of the local-level navigation equations.
//!
//! One IMU sample advances the state over the interval that ends at the
//! sample's timestamp. Samples are interval averages of angular rate and
//! specific force, as delivered by integrating IMUs.
//!
//! The discrete update is:
//!
//! - attitude: `C+ = exp(-(w_ie + w_en) dt) C exp((w~ - b_g) dt)`
//! - velocity: `v+ = v + dt (f_n + g - (W_en + 2 W_ie) v)` with
//!   `f_n = (C + C+) / 2 (f~ - b_a)`
//! - position: `p+ = p + dt / 2 T(p) (v + v+)`
//!
//! Earth and transport rates, gravity and `T` are evaluated at the state
//! before the step. Biases are constant.

use nalgebra::Vector3;

use crate::error::{NavError, Result};
use crate::geodesy::{CurvilinearPosition, LocalEarth, NedVector};
use crate::so3::{exp_so3, Rotation, ORTHONORMALITY_TOLERANCE};

/// Longest interval a single sample may be integrated over, seconds.
pub const MAX_STEP: f64 = 0.5;

/// Attitude, velocity, position and IMU biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    /// Body-to-navigation rotation.
    pub attitude: Rotation,
    /// Velocity relative to the earth, NED m/s.
    pub velocity: NedVector,
    pub position: CurvilinearPosition,
    /// rad/s
    pub gyro_bias: Vector3<f64>,
    /// m/s^2
    pub accel_bias: Vector3<f64>,
}

impl NavState {
    pub fn at_rest(position: CurvilinearPosition) -> Self {
        Self {
            attitude: Rotation::identity(),
            velocity: Vector3::zeros(),
            position,
            gyro_bias: Vector3::zeros(),
            accel_bias: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.attitude.matrix().iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.position.is_finite()
            && self.gyro_bias.iter().all(|v| v.is_finite())
            && self.accel_bias.iter().all(|v| v.is_finite())
    }
}

/// One IMU output: mean angular rate and specific force over the interval
/// ending at `timestamp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub timestamp: f64,
    /// rad/s, body frame
    pub angular_rate: Vector3<f64>,
    /// m/s^2, body frame
    pub specific_force: Vector3<f64>,
}

/// Removes the estimated biases from a raw sample.
pub fn bias_correct(sample: &ImuSample, state: &NavState) -> (Vector3<f64>, Vector3<f64>) {
    (
        sample.angular_rate - state.gyro_bias,
        sample.specific_force - state.accel_bias,
    )
}

/// Advances `state` over `dt` seconds using `sample`.
pub fn propagate(state: &NavState, sample: &ImuSample, dt: f64) -> Result<NavState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(NavError::InvalidTimeStep { dt, max: MAX_STEP });
    }
    let (omega_ib_b, f_ib_b) = bias_correct(sample, state);
    let earth = LocalEarth::at(&state.position)?;
    let omega_ie = earth.earth_rate();
    let omega_en = earth.transport_rate(&state.velocity);

    let c_old = *state.attitude.matrix();
    let mut attitude = exp_so3(&(-(omega_ie + omega_en) * dt)) * state.attitude * exp_so3(&(omega_ib_b * dt));
    if attitude.orthonormality_residual() > ORTHONORMALITY_TOLERANCE {
        attitude = attitude.renormalized();
    }

    let f_ib_n = (c_old + attitude.matrix()) * f_ib_b * 0.5;
    let coriolis = (omega_en + omega_ie * 2.0).cross(&state.velocity);
    let velocity = state.velocity + (f_ib_n + earth.gravity_vector() - coriolis) * dt;

    let delta = earth.cart_to_curv().component_mul(&(state.velocity + velocity)) * (0.5 * dt);
    let position = state.position.offset(&delta);

    let next = NavState {
        attitude,
        velocity,
        position,
        gyro_bias: state.gyro_bias,
        accel_bias: state.accel_bias,
    };
    if !next.is_finite() {
        return Err(NavError::NonFinite("propagated state"));
    }
    Ok(next)
}
