//! The AUV navigation filter: UKF-M over attitude, velocity, position and
//! IMU biases.

use std::f64::consts::PI;

use nalgebra::{Matrix1, Matrix3, SMatrix, SVector, Vector1, Vector3};
use log::info;
use serde::{Deserialize, Serialize};

use super::unscented::{self, Manifold, SigmaWeights, UpdateOutcome};
use crate::error::{NavError, Result};
use crate::geodesy::{CurvilinearPosition, LocalEarth};
use crate::sensors::{
    self, sensor_position_with, LeverArmSet, Measurement, NoiseConfig, Observation, PerSensor, Sensor,
};
use crate::so3::{exp_so3, log_so3, Rotation};
use crate::strapdown::{self, ImuSample, NavState};

pub const STATE_DIM: usize = 15;

/// Tangent-space error: attitude (rad), velocity (m/s), position (NED m),
/// gyro bias (rad/s), accel bias (m/s^2).
pub type ErrorVector = SVector<f64, STATE_DIM>;
pub type Covariance = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Largest age of the IMU sample used for a DVL prediction, seconds.
pub const MAX_IMU_AGE: f64 = 0.5;
const PI_MARGIN: f64 = 1e-9;

impl Manifold<STATE_DIM> for NavState {
    fn retract(&self, xi: &ErrorVector) -> Result<Self> {
        let earth = LocalEarth::at(&self.position)?;
        let dp = earth.cart_to_curv().component_mul(&xi.fixed_rows::<3>(6).into_owned());
        Ok(NavState {
            attitude: exp_so3(&xi.fixed_rows::<3>(0).into_owned()) * self.attitude,
            velocity: self.velocity + xi.fixed_rows::<3>(3),
            position: self.position.offset(&dp),
            gyro_bias: self.gyro_bias + xi.fixed_rows::<3>(9),
            accel_bias: self.accel_bias + xi.fixed_rows::<3>(12),
        })
    }

    fn inverse_retract(&self, other: &Self) -> Result<ErrorVector> {
        let phi = log_so3(&(other.attitude * self.attitude.transpose()));
        if PI - phi.norm() < PI_MARGIN {
            return Err(NavError::AnglePiDegenerate);
        }
        let earth = LocalEarth::at(&self.position)?;
        let dp = earth.curv_to_cart().component_mul(&other.position.difference(&self.position));
        let mut xi = ErrorVector::zeros();
        xi.fixed_rows_mut::<3>(0).copy_from(&phi);
        xi.fixed_rows_mut::<3>(3).copy_from(&(other.velocity - self.velocity));
        xi.fixed_rows_mut::<3>(6).copy_from(&dp);
        xi.fixed_rows_mut::<3>(9).copy_from(&(other.gyro_bias - self.gyro_bias));
        xi.fixed_rows_mut::<3>(12).copy_from(&(other.accel_bias - self.accel_bias));
        Ok(xi)
    }
}

pub fn retract(x: &NavState, xi: &ErrorVector) -> Result<NavState> {
    x.retract(xi)
}

pub fn inverse_retract(x: &NavState, x_hat: &NavState) -> Result<ErrorVector> {
    x.inverse_retract(x_hat)
}

/// Initial one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialUncertainty {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub heading_deg: f64,
    /// m/s
    pub velocity: f64,
    /// Horizontal position, m. Defaults to the GPS standard deviation.
    pub horizontal_position: Option<f64>,
    /// m
    pub vertical_position: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s^2
    pub accel_bias: f64,
}

impl Default for InitialUncertainty {
    fn default() -> Self {
        Self {
            roll_deg: 10.0,
            pitch_deg: 10.0,
            heading_deg: 180.0,
            velocity: 0.5,
            horizontal_position: None,
            vertical_position: 1.0,
            gyro_bias: 3e-4,
            accel_bias: 0.05,
        }
    }
}

impl InitialUncertainty {
    /// Diagonal initial covariance.
    pub fn covariance(&self, noise: &NoiseConfig) -> Covariance {
        let horizontal = self.horizontal_position.unwrap_or_else(|| noise.sigma2_gps.sqrt());
        let std = [
            self.roll_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.heading_deg.to_radians(),
            self.velocity,
            self.velocity,
            self.velocity,
            horizontal,
            horizontal,
            self.vertical_position,
            self.gyro_bias,
            self.gyro_bias,
            self.gyro_bias,
            self.accel_bias,
            self.accel_bias,
            self.accel_bias,
        ];
        Covariance::from_diagonal(&ErrorVector::from_iterator(std.iter().map(|s| s * s)))
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.roll_deg,
            self.pitch_deg,
            self.heading_deg,
            self.velocity,
            self.horizontal_position.unwrap_or(1.0),
            self.vertical_position,
            self.gyro_bias,
            self.accel_bias,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(NavError::InvalidConfig("initial standard deviations must be positive".into()))
        }
    }
}

/// Filter tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Sigma-point spread alpha^2.
    pub alpha_sq: f64,
    /// Gyro bias random-walk density, rad^2/s^3.
    pub gyro_bias_walk: f64,
    /// Accelerometer bias random-walk density, m^2/s^5.
    pub accel_bias_walk: f64,
    pub initial: InitialUncertainty,
    /// Outlier threshold multiplier M.
    pub gate_multiplier: PerSensor<f64>,
    pub enabled: PerSensor<bool>,
    /// Master switch for innovation gating.
    pub gating: bool,
    /// Accepted measurements per sensor before the gate engages.
    pub gate_warmup: u32,
    /// Consecutive rejections of one sensor after which its warmup restarts; 0 never restarts.
    pub gate_reset_after: u32,
    /// Measurements older than the filter time by more than this are dropped, s.
    pub max_measurement_lag: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha_sq: 1e-3,
            gyro_bias_walk: 3e-12,
            accel_bias_walk: 1e-10,
            initial: InitialUncertainty::default(),
            gate_multiplier: PerSensor::splat(5.0),
            enabled: PerSensor::splat(true),
            gating: true,
            gate_warmup: 10,
            gate_reset_after: 3,
            max_measurement_lag: 0.5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        SigmaWeights::new(STATE_DIM, self.alpha_sq)?;
        if !(self.gyro_bias_walk >= 0.0 && self.accel_bias_walk >= 0.0) {
            return Err(NavError::InvalidConfig("bias random-walk densities must be non-negative".into()));
        }
        for sensor in Sensor::ALL {
            let m = self.gate_multiplier.get(sensor);
            if !(m > 0.0 && m.is_finite()) {
                return Err(NavError::InvalidConfig(format!("gate multiplier for {sensor} must be positive, got {m}")));
            }
        }
        if !(self.max_measurement_lag >= 0.0) {
            return Err(NavError::InvalidConfig("max_measurement_lag must be non-negative".into()));
        }
        self.initial.validate()
    }

    /// Discrete process noise over `dt` seconds.
    pub fn process_noise(&self, noise: &NoiseConfig, dt: f64) -> Covariance {
        let blocks = [
            noise.sigma2_gyro * dt,
            noise.sigma2_accel * dt,
            0.0,
            self.gyro_bias_walk * dt,
            self.accel_bias_walk * dt,
        ];
        Covariance::from_diagonal(&ErrorVector::from_fn(|i, _| blocks[i / 3]))
    }
}

/// Outcome of offering a measurement to the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub sensor: Sensor,
    pub accepted: bool,
    /// Whether the innovation gate was armed for this measurement.
    pub gated: bool,
    pub innovation: Vec<f64>,
    /// Diagonal of the innovation covariance.
    pub innovation_variance: Vec<f64>,
    pub threshold: f64,
}

/// Filter state, covariance and configuration.
#[derive(Debug, Clone)]
pub struct Ukfm {
    state: NavState,
    covariance: Covariance,
    config: FilterConfig,
    noise: NoiseConfig,
    lever_arms: LeverArmSet,
    weights: SigmaWeights,
    accepted: PerSensor<u32>,
    warmup_left: PerSensor<u32>,
    rejected_run: PerSensor<u32>,
}

impl Ukfm {
    pub fn new(
        state: NavState,
        covariance: Covariance,
        config: FilterConfig,
        noise: NoiseConfig,
        lever_arms: LeverArmSet,
    ) -> Result<Self> {
        config.validate()?;
        noise.validate()?;
        if !state.is_finite() {
            return Err(NavError::NonFinite("initial state"));
        }
        if covariance.cholesky().is_none() {
            return Err(NavError::CovarianceNotPositiveDefinite);
        }
        Ok(Self {
            state,
            covariance: unscented::symmetrize(&covariance),
            weights: SigmaWeights::new(STATE_DIM, config.alpha_sq)?,
            config,
            noise,
            lever_arms,
            accepted: PerSensor::splat(0),
            warmup_left: PerSensor::splat(config.gate_warmup),
            rejected_run: PerSensor::splat(0),
        })
    }

    /// Starts the filter from a GPS fix: level attitude (optionally rotated to
    /// `initial_heading`), zero velocity and biases, position at the fix.
    pub fn initialize(
        first_gps: &Measurement,
        config: FilterConfig,
        noise: NoiseConfig,
        lever_arms: LeverArmSet,
        initial_heading: Option<f64>,
    ) -> Result<Self> {
        let Observation::Gps { position } = first_gps.observation else {
            return Err(NavError::InvalidConfig("filter must be initialized from a GPS measurement".into()));
        };
        let mut state = NavState::at_rest(position);
        if let Some(heading) = initial_heading {
            state.attitude = exp_so3(&Vector3::new(0.0, 0.0, heading));
        }
        let covariance = config.initial.covariance(&noise);
        Self::new(state, covariance, config, noise, lever_arms)
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn lever_arms(&self) -> &LeverArmSet {
        &self.lever_arms
    }

    pub fn weights(&self) -> &SigmaWeights {
        &self.weights
    }

    /// Accepted measurement count per sensor.
    pub fn accepted_counts(&self) -> PerSensor<u32> {
        self.accepted
    }

    /// Integrates one IMU sample over `dt`.
    pub fn predict(&mut self, sample: &ImuSample, dt: f64) -> Result<()> {
        let q = self.config.process_noise(&self.noise, dt);
        let (state, covariance) =
            unscented::propagate(&self.state, &self.covariance, &q, &self.weights, |s| {
                strapdown::propagate(s, sample, dt)
            })?;
        self.state = state;
        self.covariance = covariance;
        Ok(())
    }

    fn gate_for(&self, sensor: Sensor) -> Option<f64> {
        let armed = self.config.gating && self.warmup_left.get(sensor) == 0;
        armed.then(|| self.config.gate_multiplier.get(sensor))
    }

    /// Processes one aiding measurement. `latest_imu` supplies the angular rate
    /// needed by the DVL lever-arm term.
    pub fn update(&mut self, meas: &Measurement, latest_imu: Option<&ImuSample>) -> Result<UpdateReport> {
        meas.validate()?;
        let sensor = meas.sensor();
        let gate = self.gate_for(sensor);
        let report = match meas.observation {
            Observation::Dvl { velocity } => {
                let imu = latest_imu.ok_or(NavError::MissingImu)?;
                let age = meas.timestamp - imu.timestamp;
                if age > MAX_IMU_AGE {
                    return Err(NavError::StaleImu { age, max: MAX_IMU_AGE });
                }
                let arm = self.lever_arms.dvl;
                let r = Matrix3::identity() * self.noise.sigma2_dvl;
                let out = unscented::update(&self.state, &self.covariance, &velocity, &r, &self.weights, gate, |s| {
                    sensors::predict_dvl(s, imu, &arm)
                })?;
                self.apply(sensor, gate, out)
            }
            Observation::Depth { depth } => {
                let arm = self.lever_arms.depth;
                let noise = self.noise;
                let r = Matrix1::new(noise.sigma2_depth);
                let out = unscented::update(
                    &self.state,
                    &self.covariance,
                    &Vector1::new(depth),
                    &r,
                    &self.weights,
                    gate,
                    |s| sensors::predict_depth(s, &arm, &noise).map(Vector1::new),
                )?;
                self.apply(sensor, gate, out)
            }
            Observation::Gps { position } => {
                let arm = self.lever_arms.gps;
                let reference = self.state.position;
                let scale = LocalEarth::at(&reference)?.curv_to_cart();
                let to_local = |p: &CurvilinearPosition| scale.component_mul(&p.difference(&reference));
                let z = to_local(&position);
                let r = Matrix3::identity() * self.noise.sigma2_gps;
                let out = unscented::update(&self.state, &self.covariance, &z, &r, &self.weights, gate, |s| {
                    let earth = LocalEarth::at(&s.position)?;
                    Ok(to_local(&sensor_position_with(s, &arm, &earth)))
                })?;
                self.apply(sensor, gate, out)
            }
            Observation::Range { range, transmitter } => {
                let arm = self.lever_arms.range;
                let r = Matrix1::new(self.noise.sigma2_range);
                let out = unscented::update(
                    &self.state,
                    &self.covariance,
                    &Vector1::new(range),
                    &r,
                    &self.weights,
                    gate,
                    |s| sensors::predict_range(s, &arm, &transmitter).map(Vector1::new),
                )?;
                self.apply(sensor, gate, out)
            }
        };
        Ok(report)
    }

    fn apply<const M: usize>(
        &mut self,
        sensor: Sensor,
        gate: Option<f64>,
        out: UpdateOutcome<NavState, STATE_DIM, M>,
    ) -> UpdateReport {
        if out.accepted {
            self.state = out.state;
            self.covariance = out.covariance;
            *self.accepted.get_mut(sensor) += 1;
            let left = self.warmup_left.get_mut(sensor);
            *left = left.saturating_sub(1);
            *self.rejected_run.get_mut(sensor) = 0;
        } else {
            let run = self.rejected_run.get_mut(sensor);
            *run += 1;
            let reset = self.config.gate_reset_after;
            if reset > 0 && *run >= reset {
                info!("{sensor}: {run} consecutive rejections, restarting gate warmup");
                *run = 0;
                *self.warmup_left.get_mut(sensor) = self.config.gate_warmup;
            }
        }
        UpdateReport {
            sensor,
            accepted: out.accepted,
            gated: gate.is_some(),
            innovation: out.innovation.iter().copied().collect(),
            innovation_variance: out.innovation_covariance.diagonal().iter().copied().collect(),
            threshold: out.threshold,
        }
    }

    /// Replaces the attitude with its nearest rotation.
    pub fn renormalize(&mut self) {
        self.state.attitude = self.state.attitude.renormalized();
    }
}

/// Heading-only rotation, radians.
pub fn heading_rotation(heading: f64) -> Rotation {
    exp_so3(&Vector3::new(0.0, 0.0, heading))
}
