//! Mission description for the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geodesy::CurvilinearPosition;

/// Mission start point, degrees and meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Origin {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl Default for Origin {
    fn default() -> Self {
        Self { latitude_deg: 37.0553, longitude_deg: -80.6181, altitude_m: 0.0 }
    }
}

impl Origin {
    pub fn position(&self) -> Result<CurvilinearPosition> {
        CurvilinearPosition::from_degrees(self.latitude_deg, self.longitude_deg, self.altitude_m)
    }
}

/// Surface figure-eight flown at constant speed `2 pi radius / period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureEight {
    pub period_s: f64,
    pub radius_m: f64,
    /// Rounded to a whole number of periods.
    pub duration_s: f64,
}

impl Default for FigureEight {
    fn default() -> Self {
        Self { period_s: 120.0, radius_m: 50.0, duration_s: 1800.0 }
    }
}

impl FigureEight {
    pub fn speed(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius_m / self.period_s
    }

    pub fn periods(&self) -> u64 {
        (self.duration_s / self.period_s).round().max(0.0) as u64
    }
}

/// Survey of parallel swaths joined by half-turns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lawnmower {
    pub swath_length_m: f64,
    pub swath_spacing_m: f64,
    pub swath_count: u32,
    pub speed_mps: f64,
    pub depth_m: f64,
    /// Time to reach depth at the start of the first swath.
    pub dive_s: f64,
    /// Time to climb back to the surface after the last swath.
    pub ascent_s: f64,
    /// Time spent on the surface after the ascent.
    pub surface_hold_s: f64,
    /// Ramp time into and out of each turn.
    pub turn_ramp_s: f64,
}

impl Default for Lawnmower {
    fn default() -> Self {
        Self {
            swath_length_m: 1000.0,
            swath_spacing_m: 50.0,
            swath_count: 9,
            speed_mps: 1.6,
            depth_m: 3.0,
            dive_s: 60.0,
            ascent_s: 60.0,
            surface_hold_s: 120.0,
            turn_ramp_s: 4.0,
        }
    }
}

/// Sensor output schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub dvl_hz: f64,
    pub depth_hz: f64,
    /// Emitted only while the vehicle is within 0.5 m of the surface.
    pub gps_hz: f64,
    pub range_period_s: f64,
    pub range_delivery: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { dvl_hz: 5.0, depth_hz: 2.0, gps_hz: 1.0, range_period_s: 15.0, range_delivery: 0.45 }
    }
}

/// DVL outlier injection. `count` places exactly that many outliers at random
/// DVL epochs after `start_s`; otherwise each epoch is corrupted with
/// probability `rate_hz / dvl_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierSpec {
    pub rate_hz: f64,
    pub count: Option<u32>,
    /// Deviation in nominal DVL standard deviations.
    pub magnitude: f64,
    pub start_s: f64,
}

impl Default for OutlierSpec {
    fn default() -> Self {
        Self { rate_hz: 0.0, count: None, magnitude: 10.0, start_s: 0.0 }
    }
}

/// Acoustic transmitter on the support vessel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitterSpec {
    /// Mean position relative to the origin, north and east meters.
    pub offset_m: [f64; 2],
    /// Transducer depth below the origin altitude, m.
    pub depth_m: f64,
    pub max_speed_mps: f64,
}

impl Default for TransmitterSpec {
    fn default() -> Self {
        Self { offset_m: [400.0, 300.0], depth_m: 1.0, max_speed_mps: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub seed: u64,
    pub origin: Origin,
    pub imu_rate_hz: f64,
    /// Initial (and survey) heading, degrees.
    pub initial_heading_deg: f64,
    /// Truncates the mission; required when no pattern is configured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// In a config file a pattern is flown only when its table is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure_eight: Option<FigureEight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lawnmower: Option<Lawnmower>,
    /// Time spent at rest on the surface before moving.
    pub initial_hold_s: f64,
    /// Time to reach cruise speed from rest, and between patterns.
    pub speed_ramp_s: f64,
    pub schedule: Schedule,
    pub outliers: OutlierSpec,
    pub transmitter: TransmitterSpec,
    /// rad/s
    pub gyro_bias: [f64; 3],
    /// m/s^2
    pub accel_bias: [f64; 3],
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            origin: Origin::default(),
            imu_rate_hz: 100.0,
            initial_heading_deg: 30.0,
            duration_s: None,
            figure_eight: Some(FigureEight::default()),
            lawnmower: Some(Lawnmower::default()),
            initial_hold_s: 30.0,
            speed_ramp_s: 20.0,
            schedule: Schedule::default(),
            outliers: OutlierSpec::default(),
            transmitter: TransmitterSpec::default(),
            gyro_bias: [1e-4, -5e-5, 2e-5],
            accel_bias: [0.02, -0.01, 0.03],
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(NavError::InvalidConfig(format!("{name} must be positive, got {value}")))
    }
}

fn non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(NavError::InvalidConfig(format!("{name} must be non-negative, got {value}")))
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        self.origin.position()?;
        positive("imu_rate_hz", self.imu_rate_hz)?;
        if !self.initial_heading_deg.is_finite() {
            return Err(NavError::NonFinite("initial_heading_deg"));
        }
        if let Some(d) = self.duration_s {
            non_negative("duration_s", d)?;
        }
        non_negative("initial_hold_s", self.initial_hold_s)?;
        positive("speed_ramp_s", self.speed_ramp_s)?;
        if let Some(f) = &self.figure_eight {
            positive("figure_eight.period_s", f.period_s)?;
            positive("figure_eight.radius_m", f.radius_m)?;
            non_negative("figure_eight.duration_s", f.duration_s)?;
        }
        if let Some(l) = &self.lawnmower {
            positive("lawnmower.swath_length_m", l.swath_length_m)?;
            positive("lawnmower.swath_spacing_m", l.swath_spacing_m)?;
            positive("lawnmower.speed_mps", l.speed_mps)?;
            non_negative("lawnmower.depth_m", l.depth_m)?;
            positive("lawnmower.dive_s", l.dive_s)?;
            positive("lawnmower.ascent_s", l.ascent_s)?;
            non_negative("lawnmower.surface_hold_s", l.surface_hold_s)?;
            positive("lawnmower.turn_ramp_s", l.turn_ramp_s)?;
            if l.swath_count < 1 {
                return Err(NavError::InvalidConfig("lawnmower.swath_count must be at least 1".into()));
            }
            if l.dive_s * l.speed_mps > l.swath_length_m {
                return Err(NavError::InvalidConfig("lawnmower dive does not fit in the first swath".into()));
            }
            let turn_radius = l.swath_spacing_m / 2.0;
            if l.turn_ramp_s * l.speed_mps / turn_radius > std::f64::consts::PI {
                return Err(NavError::InvalidConfig("lawnmower.turn_ramp_s is too long for the turn".into()));
            }
        }
        let s = &self.schedule;
        positive("schedule.dvl_hz", s.dvl_hz)?;
        positive("schedule.depth_hz", s.depth_hz)?;
        positive("schedule.gps_hz", s.gps_hz)?;
        positive("schedule.range_period_s", s.range_period_s)?;
        if !(0.0..=1.0).contains(&s.range_delivery) {
            return Err(NavError::InvalidConfig(format!(
                "schedule.range_delivery must lie in [0, 1], got {}",
                s.range_delivery
            )));
        }
        non_negative("outliers.rate_hz", self.outliers.rate_hz)?;
        non_negative("outliers.magnitude", self.outliers.magnitude)?;
        non_negative("outliers.start_s", self.outliers.start_s)?;
        non_negative("transmitter.max_speed_mps", self.transmitter.max_speed_mps)?;
        if !self.gyro_bias.iter().chain(self.accel_bias.iter()).all(|v| v.is_finite()) {
            return Err(NavError::NonFinite("true IMU biases"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        MissionConfig::default().validate().unwrap();
        assert_eq!(FigureEight::default().periods(), 15);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = MissionConfig::default();
        c.schedule.range_delivery = 1.5;
        assert!(c.validate().is_err());
        let mut c = MissionConfig::default();
        c.lawnmower.as_mut().unwrap().swath_count = 0;
        assert!(c.validate().is_err());
        let mut c = MissionConfig::default();
        c.imu_rate_hz = 0.0;
        assert!(c.validate().is_err());
        let c = MissionConfig { figure_eight: None, lawnmower: None, ..MissionConfig::default() };
        c.validate().unwrap();
        assert!(crate::sim::Trajectory::new(&c).is_err());
    }
}
