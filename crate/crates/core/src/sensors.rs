//! Measurement models for the aiding sensors.
//!
//! Every sensor sits at a lever arm from the IMU (body) origin. Positions are
//! shifted through the attitude and the curvilinear transform; velocities pick
//! up the `w_eb x l` term from the body's rotation relative to the earth.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geodesy::{self, CurvilinearPosition, LocalEarth};
use crate::strapdown::{ImuSample, NavState};

/// Largest lever arm accepted, meters.
pub const MAX_LEVER_ARM: f64 = 10.0;

/// Offset from the body origin to a sensor frame, body axes, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverArm(Vector3<f64>);

impl LeverArm {
    pub fn new(offset: Vector3<f64>) -> Result<Self> {
        if !offset.iter().all(|v| v.is_finite()) {
            return Err(NavError::NonFinite("lever arm"));
        }
        if offset.norm() >= MAX_LEVER_ARM {
            return Err(NavError::InvalidConfig(format!(
                "lever arm {:?} exceeds {MAX_LEVER_ARM} m",
                offset.as_slice()
            )));
        }
        Ok(Self(offset))
    }

    pub const fn zero() -> Self {
        Self(Vector3::new(0.0, 0.0, 0.0))
    }

    pub fn offset(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Lever arms of all aiding sensors. Defaults are the 690 AUV values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverArmSet {
    pub dvl: LeverArm,
    pub depth: LeverArm,
    pub range: LeverArm,
    pub gps: LeverArm,
}

impl Default for LeverArmSet {
    fn default() -> Self {
        Self {
            dvl: LeverArm(Vector3::new(0.0984, 0.0, 0.0548)),
            depth: LeverArm(Vector3::new(-1.4192, -0.0254, -0.0156)),
            range: LeverArm(Vector3::new(-0.0811, 0.0, 0.1678)),
            gps: LeverArm(Vector3::new(-1.2934, 0.0, -0.1926)),
        }
    }
}

impl LeverArmSet {
    pub fn zero() -> Self {
        Self {
            dvl: LeverArm::zero(),
            depth: LeverArm::zero(),
            range: LeverArm::zero(),
            gps: LeverArm::zero(),
        }
    }

    pub fn get(&self, sensor: Sensor) -> &LeverArm {
        match sensor {
            Sensor::Dvl => &self.dvl,
            Sensor::Depth => &self.depth,
            Sensor::Gps => &self.gps,
            Sensor::Range => &self.range,
        }
    }
}

/// Sensor noise variances and the water-surface datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gyro white-noise density, rad^2/s. A sample averaged over `dt` has variance `sigma2_gyro / dt`.
    pub sigma2_gyro: f64,
    /// Accelerometer white-noise density, m^2/s^3. A sample averaged over `dt` has variance `sigma2_accel / dt`.
    pub sigma2_accel: f64,
    /// DVL noise variance per axis, m^2/s^2.
    pub sigma2_dvl: f64,
    /// Depth noise variance, m^2.
    pub sigma2_depth: f64,
    /// GPS position noise variance per NED axis, m^2.
    pub sigma2_gps: f64,
    /// Acoustic range noise variance, m^2.
    pub sigma2_range: f64,
    /// Altitude of the water surface, m.
    pub h_sea: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma2_gyro: 8.4616e-10,
            sigma2_accel: 6.1549e-5,
            sigma2_dvl: 0.0001,
            sigma2_depth: 7.0e-5,
            sigma2_gps: 6.25,
            sigma2_range: 1.0,
            h_sea: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sigma2_gyro", self.sigma2_gyro),
            ("sigma2_accel", self.sigma2_accel),
            ("sigma2_dvl", self.sigma2_dvl),
            ("sigma2_depth", self.sigma2_depth),
            ("sigma2_gps", self.sigma2_gps),
            ("sigma2_range", self.sigma2_range),
        ];
        for (name, value) in all {
            if !(value > 0.0 && value.is_finite()) {
                return Err(NavError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.h_sea.is_finite() {
            return Err(NavError::NonFinite("h_sea"));
        }
        Ok(())
    }
}

/// Aiding sensor kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Dvl,
    Depth,
    Gps,
    Range,
}

impl Sensor {
    pub const ALL: [Sensor; 4] = [Sensor::Dvl, Sensor::Depth, Sensor::Gps, Sensor::Range];

    pub fn name(&self) -> &'static str {
        match self {
            Sensor::Dvl => "dvl",
            Sensor::Depth => "depth",
            Sensor::Gps => "gps",
            Sensor::Range => "range",
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-sensor value table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerSensor<T> {
    pub dvl: T,
    pub depth: T,
    pub gps: T,
    pub range: T,
}

impl<T: Copy> PerSensor<T> {
    pub fn splat(value: T) -> Self {
        Self { dvl: value, depth: value, gps: value, range: value }
    }

    pub fn get(&self, sensor: Sensor) -> T {
        match sensor {
            Sensor::Dvl => self.dvl,
            Sensor::Depth => self.depth,
            Sensor::Gps => self.gps,
            Sensor::Range => self.range,
        }
    }

    pub fn get_mut(&mut self, sensor: Sensor) -> &mut T {
        match sensor {
            Sensor::Dvl => &mut self.dvl,
            Sensor::Depth => &mut self.depth,
            Sensor::Gps => &mut self.gps,
            Sensor::Range => &mut self.range,
        }
    }
}

/// Observation payloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    /// Sensor-frame velocity relative to the earth, m/s.
    Dvl { velocity: Vector3<f64> },
    /// Depth below the water surface, m.
    Depth { depth: f64 },
    /// Antenna position.
    Gps { position: CurvilinearPosition },
    /// One-way-travel-time range to a transmitter at a known position, m.
    Range { range: f64, transmitter: CurvilinearPosition },
}

/// A timestamped aiding measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub timestamp: f64,
    pub observation: Observation,
}

impl Measurement {
    pub fn new(timestamp: f64, observation: Observation) -> Result<Self> {
        let m = Self { timestamp, observation };
        m.validate()?;
        Ok(m)
    }

    pub fn sensor(&self) -> Sensor {
        match self.observation {
            Observation::Dvl { .. } => Sensor::Dvl,
            Observation::Depth { .. } => Sensor::Depth,
            Observation::Gps { .. } => Sensor::Gps,
            Observation::Range { .. } => Sensor::Range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() {
            return Err(NavError::NonFinite("measurement timestamp"));
        }
        match self.observation {
            Observation::Dvl { velocity } if !velocity.iter().all(|v| v.is_finite()) => {
                Err(NavError::NonFinite("DVL velocity"))
            }
            Observation::Depth { depth } if !(depth.is_finite() && depth >= -1.0) => {
                Err(NavError::InvalidConfig(format!("depth {depth} m is below -1 m or not finite")))
            }
            Observation::Gps { position } => {
                CurvilinearPosition::new(position.latitude, position.longitude, position.altitude).map(|_| ())
            }
            Observation::Range { range, transmitter } => {
                if !(range.is_finite() && range >= 0.0) {
                    return Err(NavError::InvalidConfig(format!("range {range} m must be non-negative")));
                }
                CurvilinearPosition::new(transmitter.latitude, transmitter.longitude, transmitter.altitude)
                    .map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

/// Curvilinear position of a sensor frame.
pub fn sensor_position(state: &NavState, arm: &LeverArm) -> Result<CurvilinearPosition> {
    let earth = LocalEarth::at(&state.position)?;
    Ok(sensor_position_with(state, arm, &earth))
}

pub(crate) fn sensor_position_with(state: &NavState, arm: &LeverArm, earth: &LocalEarth) -> CurvilinearPosition {
    let arm_n = state.attitude.rotate(arm.offset());
    state.position.offset(&earth.cart_to_curv().component_mul(&arm_n))
}

/// Body angular rate relative to the earth, body axes.
pub fn omega_eb_b(state: &NavState, sample: &ImuSample) -> Result<Vector3<f64>> {
    let omega_ie_n = geodesy::earth_rate_n(state.position.latitude)?;
    let omega_ib_b = sample.angular_rate - state.gyro_bias;
    Ok(omega_ib_b - state.attitude.matrix().tr_mul(&omega_ie_n))
}

/// Predicted DVL velocity in the (body-aligned) DVL frame.
pub fn predict_dvl(state: &NavState, sample: &ImuSample, arm: &LeverArm) -> Result<Vector3<f64>> {
    let v_b = state.attitude.matrix().tr_mul(&state.velocity);
    Ok(v_b + omega_eb_b(state, sample)?.cross(arm.offset()))
}

/// Predicted depth of the depth-sensor frame below `h_sea`.
pub fn predict_depth(state: &NavState, arm: &LeverArm, noise: &NoiseConfig) -> Result<f64> {
    Ok(noise.h_sea - sensor_position(state, arm)?.altitude)
}

/// Predicted GPS antenna position.
pub fn predict_gps(state: &NavState, arm: &LeverArm) -> Result<CurvilinearPosition> {
    sensor_position(state, arm)
}

/// GPS noise covariance in curvilinear units at `position`.
pub fn gps_noise_covariance(position: &CurvilinearPosition, noise: &NoiseConfig) -> Result<Matrix3<f64>> {
    let t = geodesy::cart_to_curv_matrix(position)?;
    Ok(t * t.transpose() * noise.sigma2_gps)
}

/// Predicted range from the acoustic transducer to a transmitter, meters.
pub fn predict_range(state: &NavState, arm: &LeverArm, transmitter: &CurvilinearPosition) -> Result<f64> {
    let sensor = sensor_position(state, arm)?;
    curvilinear_distance(&sensor, transmitter)
}

/// Distance between two nearby positions, scaling the curvilinear
/// difference to meters at `from`.
pub fn curvilinear_distance(from: &CurvilinearPosition, to: &CurvilinearPosition) -> Result<f64> {
    let scale = LocalEarth::at(from)?.curv_to_cart();
    Ok(scale.component_mul(&to.difference(from)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{curv_to_cart_matrix, principal_radii};
    use crate::so3::{exp_so3, from_euler};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn state_at(lat: f64, h: f64) -> NavState {
        NavState::at_rest(CurvilinearPosition::new(lat, 0.2, h).unwrap())
    }

    fn imu(w: Vector3<f64>) -> ImuSample {
        ImuSample { timestamp: 0.0, angular_rate: w, specific_force: Vector3::zeros() }
    }

    #[test]
    fn zero_arm_is_body_position() {
        let s = state_at(0.5, -3.0);
        assert_eq!(sensor_position(&s, &LeverArm::zero()).unwrap(), s.position);
        assert_eq!(predict_gps(&s, &LeverArm::zero()).unwrap(), s.position);
    }

    #[test]
    fn gps_arm_at_equator() {
        let s = state_at(0.0, 0.0);
        let arms = LeverArmSet::default();
        let p = sensor_position(&s, &arms.gps).unwrap();
        let (rn, _) = principal_radii(0.0).unwrap();
        assert_relative_eq!(p.latitude - s.position.latitude, -1.2934 / rn, max_relative = 1e-12);
        assert_relative_eq!(p.altitude - s.position.altitude, 0.1926, epsilon = 1e-15);
        assert_eq!(p.longitude, s.position.longitude);
    }

    #[test]
    fn half_turn_negates_horizontal_offset() {
        let mut s = state_at(0.3, 0.0);
        let arm = LeverArm::new(Vector3::new(1.0, 0.5, -0.2)).unwrap();
        let p0 = sensor_position(&s, &arm).unwrap().difference(&s.position);
        s.attitude = exp_so3(&Vector3::new(0.0, 0.0, PI));
        let p1 = sensor_position(&s, &arm).unwrap().difference(&s.position);
        assert_relative_eq!(p1.x, -p0.x, max_relative = 1e-12);
        assert_relative_eq!(p1.y, -p0.y, max_relative = 1e-12);
        assert_relative_eq!(p1.z, p0.z, max_relative = 1e-12);
    }

    #[test]
    fn earth_rate_cancels() {
        let mut s = state_at(0.7, 0.0);
        s.attitude = from_euler(0.1, -0.2, 1.3);
        let w = s.attitude.matrix().tr_mul(&geodesy::earth_rate_n(0.7).unwrap());
        assert!(omega_eb_b(&s, &imu(w)).unwrap().norm() < 1e-20);
        let eq = state_at(0.0, 0.0);
        let out = omega_eb_b(&eq, &imu(Vector3::new(0.1, 0.0, 0.0))).unwrap();
        assert_eq!(out, Vector3::new(0.1 - 7.292115e-5, 0.0, 0.0));
        let mut shifted = s;
        let shift = Vector3::new(0.01, -0.02, 0.03);
        shifted.gyro_bias += shift;
        let a = omega_eb_b(&s, &imu(Vector3::new(0.1, 0.2, 0.3))).unwrap();
        let b = omega_eb_b(&shifted, &imu(Vector3::new(0.1, 0.2, 0.3) + shift)).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-16);
    }

    #[test]
    fn dvl_examples() {
        let mut s = state_at(0.0, 0.0);
        s.attitude = from_euler(0.0, 0.0, 0.8);
        s.velocity = Vector3::new(1.0, 0.3, 0.0);
        let w = s.attitude.matrix().tr_mul(&geodesy::earth_rate_n(0.0).unwrap());
        let expected = s.attitude.matrix().tr_mul(&s.velocity);
        assert_relative_eq!(predict_dvl(&s, &imu(w), &LeverArm::zero()).unwrap(), expected, epsilon = 1e-15);

        // Table I DVL arm spinning at 1 rad/s about body z.
        let still = state_at(0.0, 0.0);
        let earth_b = geodesy::earth_rate_n(0.0).unwrap();
        let arm = LeverArmSet::default().dvl;
        let out = predict_dvl(&still, &imu(Vector3::new(0.0, 0.0, 1.0) + earth_b), &arm).unwrap();
        assert_relative_eq!(out, Vector3::new(0.0, 0.0984, 0.0), epsilon = 1e-15);

        let mut cruise = state_at(0.0, 0.0);
        cruise.velocity = Vector3::new(1.6, 0.0, 0.0);
        let out = predict_dvl(&cruise, &imu(earth_b), &arm).unwrap();
        assert_relative_eq!(out, Vector3::new(1.6, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn depth_examples() {
        let noise = NoiseConfig::default();
        let s = state_at(0.4, -3.0);
        assert_eq!(predict_depth(&s, &LeverArm::zero(), &noise).unwrap(), 3.0);
        let arm = LeverArm::new(Vector3::new(0.0, 0.0, -0.0156)).unwrap();
        assert_relative_eq!(predict_depth(&s, &arm, &noise).unwrap(), 3.0 - 0.0156, epsilon = 1e-12);
        let mut nose_up = s;
        nose_up.attitude = from_euler(0.0, FRAC_PI_2, 0.0);
        let arm = LeverArm::new(Vector3::new(-1.4192, 0.0, 0.0)).unwrap();
        assert_relative_eq!(predict_depth(&nose_up, &arm, &noise).unwrap(), 3.0 + 1.4192, epsilon = 1e-12);
    }

    #[test]
    fn gps_covariance_maps_meters() {
        let p = CurvilinearPosition::new(0.6, 0.0, 0.0).unwrap();
        let cov = gps_noise_covariance(&p, &NoiseConfig::default()).unwrap();
        let back = curv_to_cart_matrix(&p).unwrap();
        assert_relative_eq!(back * cov * back.transpose(), Matrix3::identity() * 6.25, max_relative = 1e-12);
    }

    #[test]
    fn range_examples() {
        let s = state_at(0.6, -3.0);
        let arm = LeverArm::zero();
        assert_eq!(predict_range(&s, &arm, &s.position).unwrap(), 0.0);
        let (rn, _) = principal_radii(0.6).unwrap();
        let north = s.position.offset(&Vector3::new(100.0 / (rn - 3.0), 0.0, 0.0));
        assert!((predict_range(&s, &arm, &north).unwrap() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn range_is_nearly_symmetric() {
        let a = CurvilinearPosition::new(0.6, 0.2, -3.0).unwrap();
        let east = a.offset(&Vector3::new(0.0, 1000.0 / (6.39e6 * 0.6f64.cos()), 3.0));
        let d1 = curvilinear_distance(&a, &east).unwrap();
        let d2 = curvilinear_distance(&east, &a).unwrap();
        assert!(((d1 - d2) / d1).abs() < 1e-6);
        let b = CurvilinearPosition::new(0.0, 0.2, 0.0).unwrap();
        let north = b.offset(&Vector3::new(1000.0 / 6.3354e6, 0.0, 0.0));
        let d1 = curvilinear_distance(&b, &north).unwrap();
        let d2 = curvilinear_distance(&north, &b).unwrap();
        assert!(((d1 - d2) / d1).abs() < 1e-6);
    }

    #[test]
    fn lever_arm_bounds() {
        assert!(LeverArm::new(Vector3::new(10.0, 0.0, 0.0)).is_err());
        assert!(LeverArm::new(Vector3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(LeverArm::new(Vector3::new(9.9, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn measurement_validation() {
        assert!(Measurement::new(0.0, Observation::Depth { depth: -1.5 }).is_err());
        assert!(Measurement::new(0.0, Observation::Depth { depth: -0.5 }).is_ok());
        let p = CurvilinearPosition::new(0.1, 0.1, 0.0).unwrap();
        assert!(Measurement::new(0.0, Observation::Range { range: -1.0, transmitter: p }).is_err());
        let m = Measurement::new(1.0, Observation::Gps { position: p }).unwrap();
        assert_eq!(m.sensor(), Sensor::Gps);
    }
}
