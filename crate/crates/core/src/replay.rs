//! Runs a recorded event stream through the navigator and collects traces.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geodesy::{CurvilinearPosition, LocalEarth};
use crate::navigator::{Event, Navigator, Verdict, VerdictCounts};
use crate::records::StateRecord;
use crate::sensors::{predict_gps, LeverArmSet, NoiseConfig, Observation, PerSensor, Sensor};
use crate::ukfm::FilterConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    /// Heading used to initialize the filter, radians. `None` uses the filter default.
    pub initial_heading: Option<f64>,
    /// Estimate trace rate; zero records every IMU epoch.
    pub estimate_rate_hz: f64,
    /// A GPS fix arriving this long after the previous one counts as a resurfacing.
    pub surfacing_gap_s: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { initial_heading: None, estimate_rate_hz: 10.0, surfacing_gap_s: 10.0 }
    }
}

/// Filter error against the first GPS fix after a gap, before that fix is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacingFix {
    pub t: f64,
    pub gap_s: f64,
    /// Predicted antenna position minus the fix, NED meters.
    pub error_ned: [f64; 3],
    pub horizontal_error_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    pub estimates: Vec<StateRecord>,
    pub counts: PerSensor<VerdictCounts>,
    pub surfacings: Vec<SurfacingFix>,
    pub imu_steps: u64,
}

impl ReplayOutput {
    /// Length of the estimated path, m.
    pub fn estimated_path_length(&self) -> Result<f64> {
        crate::report::path_length(&self.estimates)
    }
}

fn surfacing(nav: &Navigator, fix_t: f64, gap: f64, fix: &CurvilinearPosition) -> Result<Option<SurfacingFix>> {
    let Some(filter) = nav.filter() else {
        return Ok(None);
    };
    let predicted = predict_gps(filter.state(), &filter.lever_arms().gps)?;
    let scale = LocalEarth::at(fix)?.curv_to_cart();
    let e: Vector3<f64> = predicted.difference(fix).component_mul(&scale);
    Ok(Some(SurfacingFix { t: fix_t, gap_s: gap, error_ned: e.into(), horizontal_error_m: e.xy().norm() }))
}

/// Replays `events`, which must be time-ordered.
pub fn replay(
    events: &[Event],
    config: FilterConfig,
    noise: NoiseConfig,
    lever_arms: LeverArmSet,
    options: &ReplayOptions,
) -> Result<ReplayOutput> {
    let mut nav = Navigator::new(config, noise, lever_arms, options.initial_heading)?;
    let period = if options.estimate_rate_hz > 0.0 { 1.0 / options.estimate_rate_hz } else { 0.0 };
    let mut estimates = Vec::new();
    let mut pending = Vec::new();
    let mut next_record = f64::NEG_INFINITY;
    let mut last_gps: Option<f64> = None;
    let mut surfacings = Vec::new();

    for event in events {
        if let Event::Measurement(m) = event {
            if let Observation::Gps { position } = &m.observation {
                if let Some(prev) = last_gps {
                    let gap = m.timestamp - prev;
                    if gap >= options.surfacing_gap_s {
                        surfacings.extend(surfacing(&nav, m.timestamp, gap, position)?);
                    }
                }
                last_gps = Some(m.timestamp);
            }
        }
        let steps = nav.imu_steps();
        if let Some(v) = nav.process(event)? {
            pending.push(v);
        }
        if nav.imu_steps() > steps && nav.time() + 1e-9 >= next_record {
            let snap = nav.snapshot().expect("stepping filter exists");
            let mut record = StateRecord::new(snap.t, &snap.state).with_covariance(&snap.covariance);
            record.verdicts = std::mem::take(&mut pending);
            estimates.push(record);
            next_record = if period > 0.0 { snap.t + period } else { f64::NEG_INFINITY };
        }
    }
    if let Some(snap) = nav.snapshot() {
        match estimates.last_mut() {
            Some(last) if last.t >= snap.t => last.verdicts.append(&mut pending),
            _ => {
                let mut record = StateRecord::new(snap.t, &snap.state).with_covariance(&snap.covariance);
                record.verdicts = pending;
                estimates.push(record);
            }
        }
    }
    Ok(ReplayOutput { estimates, counts: *nav.counts(), surfacings, imu_steps: nav.imu_steps() })
}

/// Per-sensor verdict totals from the verdicts stored in a trace.
pub fn count_verdicts(records: &[StateRecord]) -> PerSensor<VerdictCounts> {
    let mut counts = PerSensor::<VerdictCounts>::default();
    for v in records.iter().flat_map(|r| r.verdicts.iter()) {
        let c = counts.get_mut(v.sensor);
        match v.verdict {
            Verdict::Initialized | Verdict::Accepted => c.accepted += 1,
            Verdict::Rejected => c.rejected += 1,
            Verdict::Dropped | Verdict::Disabled => c.dropped += 1,
        }
    }
    counts
}

/// Times of rejected measurements from one sensor.
pub fn rejection_times(records: &[StateRecord], sensor: Sensor) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| r.verdicts.iter())
        .filter(|v| v.sensor == sensor && v.verdict == Verdict::Rejected)
        .map(|v| v.t)
        .collect()
}
