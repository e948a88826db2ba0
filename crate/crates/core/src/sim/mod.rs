//! Mission simulator: ground truth plus noisy IMU and aiding streams.

pub mod config;
pub mod trajectory;
pub mod transmitter;

use log::warn;
use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use config::{FigureEight, Lawnmower, MissionConfig, Origin, OutlierSpec, Schedule, TransmitterSpec};
pub use trajectory::{Kinematics, Phases, Trajectory, GPS_DEPTH_LIMIT};
pub use transmitter::Transmitter;

use crate::error::{NavError, Result};
use crate::geodesy::LocalEarth;
use crate::navigator::{sort_events, Event};
use crate::sensors::{self, LeverArmSet, Measurement, NoiseConfig, Observation, PerSensor};
use crate::strapdown::{ImuSample, NavState};

/// Ground-truth state at an IMU tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub state: NavState,
}

/// Bookkeeping about a generated mission.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seed: u64,
    pub duration_s: f64,
    pub imu_samples: u64,
    pub measurements: PerSensor<u64>,
    pub ranges_sent: u64,
    pub outliers_injected: u64,
    pub outlier_times: Vec<f64>,
    /// Length of the true path, m.
    pub path_length_m: f64,
    pub alignment_end_s: Option<f64>,
    pub dive_start_s: Option<f64>,
    pub ascent_start_s: Option<f64>,
    /// First tick after the dive with the vehicle back within the GPS depth limit.
    pub resurface_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub imu: Vec<ImuSample>,
    pub measurements: Vec<Measurement>,
    pub truth: Vec<TruthRecord>,
    pub summary: SimSummary,
}

impl Simulation {
    /// IMU samples and measurements merged in processing order.
    pub fn events(&self) -> Vec<Event> {
        let mut events: Vec<Event> = self
            .imu
            .iter()
            .map(|s| Event::Imu(*s))
            .chain(self.measurements.iter().map(|m| Event::Measurement(*m)))
            .collect();
        sort_events(&mut events);
        events
    }

    /// Truth record nearest to `t`.
    pub fn truth_at(&self, t: f64) -> Option<&TruthRecord> {
        let i = self.truth.partition_point(|r| r.t < t);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|j| self.truth.get(j))
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Imu = 1,
    Dvl = 2,
    Depth = 3,
    Gps = 4,
    Range = 5,
    Delivery = 6,
    Outliers = 7,
    Transmitter = 8,
}

fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

fn gaussian3<R: Rng>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal) * sigma)
}

/// Whether a periodic event with the given rate falls in tick `k`.
fn fires(k: usize, imu_rate: f64, rate: f64) -> bool {
    let count = |i: usize| (i as f64 * rate / imu_rate + 1e-9).floor();
    k == 0 || count(k) > count(k - 1)
}

/// Runs a mission. Zero noise variances are allowed here and produce exact
/// measurements.
pub fn simulate(cfg: &MissionConfig, noise: &NoiseConfig, arms: &LeverArmSet) -> Result<Simulation> {
    cfg.validate()?;
    let noise_ok = [
        noise.sigma2_gyro,
        noise.sigma2_accel,
        noise.sigma2_dvl,
        noise.sigma2_depth,
        noise.sigma2_gps,
        noise.sigma2_range,
    ]
    .iter()
    .all(|v| *v >= 0.0 && v.is_finite());
    if !noise_ok {
        return Err(NavError::InvalidConfig("noise variances must be non-negative".into()));
    }
    let traj = Trajectory::new(cfg)?;
    let rate = cfg.imu_rate_hz;
    let n = traj.tick_count();
    let gyro_bias = Vector3::from(cfg.gyro_bias);
    let accel_bias = Vector3::from(cfg.accel_bias);
    let sched = &cfg.schedule;

    if traj.duration() <= 0.0 {
        warn!("mission duration is zero; streams are empty");
    }

    let mut imu_rng = rng(cfg.seed, Stream::Imu);
    let mut dvl_rng = rng(cfg.seed, Stream::Dvl);
    let mut depth_rng = rng(cfg.seed, Stream::Depth);
    let mut gps_rng = rng(cfg.seed, Stream::Gps);
    let mut range_rng = rng(cfg.seed, Stream::Range);
    let mut delivery_rng = rng(cfg.seed, Stream::Delivery);
    let mut outlier_rng = rng(cfg.seed, Stream::Outliers);
    let mut tx_rng = rng(cfg.seed, Stream::Transmitter);
    let transmitter = Transmitter::new(traj.origin(), &cfg.transmitter, &mut tx_rng)?;

    let dvl_ticks: Vec<usize> = (1..=n).filter(|&k| fires(k, rate, sched.dvl_hz)).collect();
    let outlier_ticks = choose_outliers(cfg, &dvl_ticks, rate, &mut outlier_rng);

    let (sg, sa) = ((noise.sigma2_gyro * rate).sqrt(), (noise.sigma2_accel * rate).sqrt());
    let (sv, sd) = (noise.sigma2_dvl.sqrt(), noise.sigma2_depth.sqrt());
    let (sp, sr) = (noise.sigma2_gps.sqrt(), noise.sigma2_range.sqrt());

    let mut imu = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n + 1);
    let mut measurements = Vec::new();
    let mut summary = SimSummary {
        seed: cfg.seed,
        duration_s: traj.duration(),
        alignment_end_s: traj.phases().alignment_end,
        dive_start_s: traj.phases().dive_start,
        ascent_start_s: traj.phases().ascent_start,
        ..SimSummary::default()
    };
    let mut outlier_iter = outlier_ticks.iter().peekable();
    let mut submerged = false;
    let mut previous_velocity = traj.velocity(0.0);

    for k in 0..=n {
        let t = traj.tick_time(k);
        let state = traj.state(t, gyro_bias, accel_bias);
        truth.push(TruthRecord { t, state });
        if k == 0 {
            continue;
        }
        let (w, f) = traj.interval_average(traj.tick_time(k - 1), t)?;
        let sample = ImuSample {
            timestamp: t,
            angular_rate: w + gyro_bias + gaussian3(&mut imu_rng, sg),
            specific_force: f + accel_bias + gaussian3(&mut imu_rng, sa),
        };
        imu.push(sample);
        summary.path_length_m += 0.5 * (previous_velocity.norm() + state.velocity.norm()) / rate;
        previous_velocity = state.velocity;

        let depth_now = traj.depth(t).0;
        if depth_now >= GPS_DEPTH_LIMIT {
            submerged = true;
        } else if submerged && summary.resurface_s.is_none() {
            summary.resurface_s = Some(t);
        }

        if fires(k, rate, sched.dvl_hz) {
            let (true_rate, _) = traj.inertial(t)?;
            let rate_sample = ImuSample { timestamp: t, angular_rate: true_rate + gyro_bias, specific_force: Vector3::zeros() };
            let exact = sensors::predict_dvl(&state, &rate_sample, &arms.dvl)?;
            let mut v = exact + gaussian3(&mut dvl_rng, sv);
            if outlier_iter.peek() == Some(&&k) {
                outlier_iter.next();
                let axis = outlier_rng.random_range(0..3);
                let sign = if outlier_rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let extra = outlier_rng.sample::<f64, _>(StandardNormal).abs() * sv;
                v[axis] = exact[axis] + sign * (cfg.outliers.magnitude * sv + extra);
                summary.outliers_injected += 1;
                summary.outlier_times.push(t);
            }
            measurements.push(Measurement::new(t, Observation::Dvl { velocity: v })?);
            summary.measurements.dvl += 1;
        }
        if fires(k, rate, sched.depth_hz) {
            let depth = sensors::predict_depth(&state, &arms.depth, noise)? + depth_rng.sample::<f64, _>(StandardNormal) * sd;
            measurements.push(Measurement::new(t, Observation::Depth { depth: depth.max(-1.0) })?);
            summary.measurements.depth += 1;
        }
        if depth_now < GPS_DEPTH_LIMIT && fires(k, rate, sched.gps_hz) {
            let antenna = sensors::predict_gps(&state, &arms.gps)?;
            let scale = LocalEarth::at(&antenna)?.cart_to_curv();
            let position = antenna.offset(&scale.component_mul(&gaussian3(&mut gps_rng, sp)));
            measurements.push(Measurement::new(t, Observation::Gps { position })?);
            summary.measurements.gps += 1;
        }
        if fires(k, rate, 1.0 / sched.range_period_s) {
            summary.ranges_sent += 1;
            let delivered = delivery_rng.random::<f64>() < sched.range_delivery;
            let n_range = range_rng.sample::<f64, _>(StandardNormal) * sr;
            if delivered {
                let tx = transmitter.position(t);
                let range = (sensors::predict_range(&state, &arms.range, &tx)? + n_range).abs();
                measurements.push(Measurement::new(t, Observation::Range { range, transmitter: tx })?);
                summary.measurements.range += 1;
            }
        }
    }
    summary.imu_samples = imu.len() as u64;
    Ok(Simulation { imu, measurements, truth, summary })
}

/// Tick indices of corrupted DVL epochs, ascending.
fn choose_outliers(cfg: &MissionConfig, dvl_ticks: &[usize], rate: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let spec = &cfg.outliers;
    let eligible: Vec<usize> = dvl_ticks.iter().copied().filter(|&k| k as f64 / rate >= spec.start_s).collect();
    let mut chosen = match spec.count {
        Some(count) => {
            let count = count as usize;
            if count > eligible.len() {
                warn!("requested {count} DVL outliers but only {} DVL epochs are eligible", eligible.len());
            }
            let count = count.min(eligible.len());
            rand::seq::index::sample(rng, eligible.len(), count).into_iter().map(|i| eligible[i]).collect()
        }
        None if spec.rate_hz > 0.0 => {
            let p = (spec.rate_hz / cfg.schedule.dvl_hz).min(1.0);
            eligible.into_iter().filter(|_| rng.random::<f64>() < p).collect()
        }
        None => Vec::new(),
    };
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> MissionConfig {
        MissionConfig {
            figure_eight: Some(FigureEight { duration_s: 240.0, ..FigureEight::default() }),
            lawnmower: None,
            imu_rate_hz: 50.0,
            ..MissionConfig::default()
        }
    }

    #[test]
    fn schedule_counts() {
        let sim = simulate(&short(), &NoiseConfig::default(), &LeverArmSet::default()).unwrap();
        let d = sim.summary.duration_s;
        assert_eq!(sim.imu.len(), (d * 50.0).round() as usize);
        assert_eq!(sim.summary.measurements.dvl, (d * 5.0).round() as u64);
        assert_eq!(sim.summary.measurements.gps, d.round() as u64);
        assert_eq!(sim.truth.len(), sim.imu.len() + 1);
        assert!(sim.measurements.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn fires_at_expected_ticks() {
        let hits: Vec<usize> = (0..=100).filter(|&k| fires(k, 100.0, 5.0)).collect();
        assert_eq!(hits, vec![0, 20, 40, 60, 80, 100]);
    }

    #[test]
    fn deterministic() {
        let a = simulate(&short(), &NoiseConfig::default(), &LeverArmSet::default()).unwrap();
        let b = simulate(&short(), &NoiseConfig::default(), &LeverArmSet::default()).unwrap();
        assert_eq!(a.imu, b.imu);
        assert_eq!(a.measurements, b.measurements);
    }

    #[test]
    fn outlier_count_is_exact() {
        let mut cfg = short();
        cfg.outliers = OutlierSpec { count: Some(7), start_s: 60.0, ..OutlierSpec::default() };
        let sim = simulate(&cfg, &NoiseConfig::default(), &LeverArmSet::default()).unwrap();
        assert_eq!(sim.summary.outliers_injected, 7);
        assert!(sim.summary.outlier_times.iter().all(|t| *t >= 60.0));
    }
}
