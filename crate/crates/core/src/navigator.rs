//! Time-ordered event loop around the filter.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::sensors::{LeverArmSet, Measurement, NoiseConfig, PerSensor, Sensor};
use crate::strapdown::{ImuSample, NavState, MAX_STEP};
use crate::ukfm::{Covariance, FilterConfig, Ukfm};

/// One input to the navigator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Imu(ImuSample),
    Measurement(Measurement),
}

impl Event {
    pub fn timestamp(&self) -> f64 {
        match self {
            Event::Imu(s) => s.timestamp,
            Event::Measurement(m) => m.timestamp,
        }
    }

    /// Processing rank among events that share a timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            Event::Imu(_) => 0,
            Event::Measurement(m) => match m.sensor() {
                Sensor::Dvl => 1,
                Sensor::Depth => 2,
                Sensor::Gps => 3,
                Sensor::Range => 4,
            },
        }
    }
}

/// Sorts events by timestamp, then rank. Stable for equal keys.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()).then(a.rank().cmp(&b.rank())));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Used to initialize the filter.
    Initialized,
    Accepted,
    /// Tripped the innovation gate.
    Rejected,
    /// Not used: arrived before initialization, too late, or without a usable IMU sample.
    Dropped,
    /// Sensor switched off in the configuration.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub t: f64,
    pub sensor: Sensor,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub accepted: u64,
    pub rejected: u64,
    pub dropped: u64,
}

/// Filter estimate at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: NavState,
    pub covariance: Covariance,
}

#[derive(Debug, Clone)]
pub struct Navigator {
    config: FilterConfig,
    noise: NoiseConfig,
    lever_arms: LeverArmSet,
    initial_heading: Option<f64>,
    filter: Option<Ukfm>,
    filter_time: f64,
    latest_imu: Option<ImuSample>,
    last_event: Option<f64>,
    counts: PerSensor<VerdictCounts>,
    imu_steps: u64,
}

const RENORMALIZE_EVERY: u64 = 100;

impl Navigator {
    /// A navigator that initializes itself from the first GPS fix.
    pub fn new(
        config: FilterConfig,
        noise: NoiseConfig,
        lever_arms: LeverArmSet,
        initial_heading: Option<f64>,
    ) -> Result<Self> {
        config.validate()?;
        noise.validate()?;
        Ok(Self {
            config,
            noise,
            lever_arms,
            initial_heading,
            filter: None,
            filter_time: f64::NEG_INFINITY,
            latest_imu: None,
            last_event: None,
            counts: PerSensor::default(),
            imu_steps: 0,
        })
    }

    /// A navigator started from a given estimate at time `t0`.
    pub fn with_filter(filter: Ukfm, t0: f64) -> Self {
        Self {
            config: *filter.config(),
            noise: *filter.noise(),
            lever_arms: *filter.lever_arms(),
            initial_heading: None,
            filter: Some(filter),
            filter_time: t0,
            latest_imu: None,
            last_event: None,
            counts: PerSensor::default(),
            imu_steps: 0,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.filter.is_some()
    }

    pub fn filter(&self) -> Option<&Ukfm> {
        self.filter.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.filter_time
    }

    pub fn counts(&self) -> &PerSensor<VerdictCounts> {
        &self.counts
    }

    pub fn imu_steps(&self) -> u64 {
        self.imu_steps
    }

    pub fn snapshot(&self) -> Option<Snapshot> {
        self.filter.as_ref().map(|f| Snapshot {
            t: self.filter_time,
            state: *f.state(),
            covariance: *f.covariance(),
        })
    }

    /// Feeds one event. Returns the verdict for measurements.
    pub fn process(&mut self, event: &Event) -> Result<Option<VerdictRecord>> {
        let t = event.timestamp();
        if !t.is_finite() {
            return Err(NavError::NonFinite("event timestamp"));
        }
        if let Some(previous) = self.last_event {
            if t < previous {
                return Err(NavError::OutOfOrder { t, previous });
            }
        }
        self.last_event = Some(t);
        match event {
            Event::Imu(sample) => {
                self.process_imu(sample)?;
                Ok(None)
            }
            Event::Measurement(m) => self.process_measurement(m).map(Some),
        }
    }

    fn process_imu(&mut self, sample: &ImuSample) -> Result<()> {
        self.latest_imu = Some(*sample);
        let Some(filter) = self.filter.as_mut() else {
            return Ok(());
        };
        let dt = sample.timestamp - self.filter_time;
        if dt <= 0.0 {
            return Ok(());
        }
        if dt > MAX_STEP {
            return Err(NavError::InvalidTimeStep { dt, max: MAX_STEP });
        }
        filter.predict(sample, dt)?;
        self.filter_time = sample.timestamp;
        self.imu_steps += 1;
        if self.imu_steps % RENORMALIZE_EVERY == 0 {
            filter.renormalize();
        }
        Ok(())
    }

    fn process_measurement(&mut self, m: &Measurement) -> Result<VerdictRecord> {
        m.validate()?;
        let sensor = m.sensor();
        let verdict = self.measurement_verdict(m)?;
        let counts = self.counts.get_mut(sensor);
        match verdict {
            Verdict::Initialized | Verdict::Accepted => counts.accepted += 1,
            Verdict::Rejected => counts.rejected += 1,
            Verdict::Dropped | Verdict::Disabled => counts.dropped += 1,
        }
        Ok(VerdictRecord { t: m.timestamp, sensor, verdict })
    }

    fn measurement_verdict(&mut self, m: &Measurement) -> Result<Verdict> {
        let sensor = m.sensor();
        if !self.config.enabled.get(sensor) {
            return Ok(Verdict::Disabled);
        }
        let Some(filter) = self.filter.as_mut() else {
            if sensor == Sensor::Gps {
                let f = Ukfm::initialize(m, self.config, self.noise, self.lever_arms, self.initial_heading)?;
                debug!("filter initialized at t = {} s", m.timestamp);
                self.filter = Some(f);
                self.filter_time = m.timestamp;
                return Ok(Verdict::Initialized);
            }
            return Ok(Verdict::Dropped);
        };
        let lag = self.filter_time - m.timestamp;
        if lag > self.config.max_measurement_lag {
            warn!("dropping {sensor} measurement at t = {} s, {lag:.3} s behind the filter", m.timestamp);
            return Ok(Verdict::Dropped);
        }
        match filter.update(m, self.latest_imu.as_ref()) {
            Ok(report) => {
                if !report.accepted {
                    debug!(
                        "rejected {sensor} at t = {} s: innovation {:?} exceeds {:.4}",
                        m.timestamp, report.innovation, report.threshold
                    );
                }
                Ok(if report.accepted { Verdict::Accepted } else { Verdict::Rejected })
            }
            Err(e @ (NavError::StaleImu { .. } | NavError::MissingImu)) if sensor == Sensor::Dvl => {
                let age = match e {
                    NavError::StaleImu { age, .. } => age,
                    _ => f64::INFINITY,
                };
                warn!("dropping DVL measurement at t = {} s: IMU sample {age:.3} s old", m.timestamp);
                Ok(Verdict::Dropped)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::CurvilinearPosition;
    use crate::sensors::Observation;
    use nalgebra::Vector3;

    fn gps(t: f64) -> Event {
        let p = CurvilinearPosition::new(0.6, -1.4, 0.0).unwrap();
        Event::Measurement(Measurement::new(t, Observation::Gps { position: p }).unwrap())
    }

    fn imu(t: f64) -> Event {
        Event::Imu(ImuSample { timestamp: t, angular_rate: Vector3::zeros(), specific_force: Vector3::new(0.0, 0.0, -9.8) })
    }

    fn nav() -> Navigator {
        Navigator::new(FilterConfig::default(), NoiseConfig::default(), LeverArmSet::zero(), None).unwrap()
    }

    #[test]
    fn waits_for_gps() {
        let mut n = nav();
        let depth = Event::Measurement(Measurement::new(0.0, Observation::Depth { depth: 0.0 }).unwrap());
        assert_eq!(n.process(&depth).unwrap().unwrap().verdict, Verdict::Dropped);
        n.process(&imu(0.01)).unwrap();
        assert!(!n.is_initialized());
        assert_eq!(n.process(&gps(0.01)).unwrap().unwrap().verdict, Verdict::Initialized);
        n.process(&imu(0.02)).unwrap();
        assert_eq!(n.time(), 0.02);
        assert_eq!(n.imu_steps(), 1);
    }

    #[test]
    fn rejects_out_of_order_and_gaps() {
        let mut n = nav();
        n.process(&gps(1.0)).unwrap();
        assert!(matches!(n.process(&imu(0.5)), Err(NavError::OutOfOrder { .. })));
        assert!(matches!(n.process(&imu(1.6)), Err(NavError::InvalidTimeStep { .. })));
    }

    #[test]
    fn drops_late_and_disabled() {
        let mut cfg = FilterConfig::default();
        cfg.enabled.range = false;
        let mut n = Navigator::new(cfg, NoiseConfig::default(), LeverArmSet::zero(), None).unwrap();
        n.process(&gps(0.0)).unwrap();
        let tx = CurvilinearPosition::new(0.6, -1.4, 0.0).unwrap();
        let range = Event::Measurement(Measurement::new(0.0, Observation::Range { range: 1.0, transmitter: tx }).unwrap());
        assert_eq!(n.process(&range).unwrap().unwrap().verdict, Verdict::Disabled);
        let dvl = Event::Measurement(Measurement::new(0.0, Observation::Dvl { velocity: Vector3::zeros() }).unwrap());
        assert_eq!(n.process(&dvl).unwrap().unwrap().verdict, Verdict::Dropped);
        assert_eq!(n.counts().dvl.dropped, 1);
    }

    #[test]
    fn sort_orders_equal_timestamps() {
        let mut events = vec![gps(1.0), imu(1.0), imu(0.5)];
        sort_events(&mut events);
        assert_eq!(events[0], imu(0.5));
        assert_eq!(events[1], imu(1.0));
        assert_eq!(events[2], gps(1.0));
    }
}
