//! Estimate-versus-truth error traces and run summaries.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::NavError;
use crate::geodesy::{wrap_angle, LocalEarth};
use crate::navigator::VerdictCounts;
use crate::records::StateRecord;
use crate::replay::{count_verdicts, ReplayOutput, SurfacingFix};
use crate::sensors::{PerSensor, Sensor};

/// Largest time offset accepted when pairing estimate and truth records, s.
pub const ALIGNMENT_TOLERANCE: f64 = 0.1;

/// Heading error below which the filter counts as converged, degrees.
pub const HEADING_CONVERGED_DEG: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no estimate lies within {tolerance} s of a truth record (estimate {estimate:?} s, truth {truth:?} s)")]
    Disjoint { estimate: Option<(f64, f64)>, truth: Option<(f64, f64)>, tolerance: f64 },
    #[error(transparent)]
    Nav(#[from] NavError),
}

/// Estimate error at one aligned epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    /// Estimate minus truth, NED meters.
    pub position_ned: [f64; 3],
    pub horizontal_m: f64,
    pub total_m: f64,
    /// Norm of the velocity error, m/s.
    pub velocity_mps: f64,
    /// Estimated minus true heading, wrapped to (-180, 180].
    pub heading_deg: f64,
}

impl ErrorRow {
    pub fn between(estimate: &StateRecord, truth: &StateRecord) -> Result<Self, NavError> {
        let (pe, pt) = (estimate.position()?, truth.position()?);
        let ned = pe.difference(&pt).component_mul(&LocalEarth::at(&pt)?.curv_to_cart());
        let dv = nalgebra::Vector3::from(estimate.velocity) - nalgebra::Vector3::from(truth.velocity);
        Ok(Self {
            t: estimate.t,
            position_ned: ned.into(),
            horizontal_m: ned.xy().norm(),
            total_m: ned.norm(),
            velocity_mps: dv.norm(),
            heading_deg: wrap_angle(estimate.heading() - truth.heading()).to_degrees(),
        })
    }
}

fn span(records: &[StateRecord]) -> Option<(f64, f64)> {
    Some((records.first()?.t, records.last()?.t))
}

/// Pairs every estimate with the nearest truth record within
/// [`ALIGNMENT_TOLERANCE`]. Both inputs must be time-ordered.
pub fn error_trace(estimates: &[StateRecord], truth: &[StateRecord]) -> Result<Vec<ErrorRow>, ReportError> {
    let mut rows = Vec::new();
    for e in estimates {
        let i = truth.partition_point(|r| r.t < e.t);
        let nearest = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| truth.get(j))
            .min_by(|a, b| (a.t - e.t).abs().total_cmp(&(b.t - e.t).abs()));
        if let Some(t) = nearest.filter(|t| (t.t - e.t).abs() <= ALIGNMENT_TOLERANCE) {
            rows.push(ErrorRow::between(e, t)?);
        }
    }
    if rows.is_empty() {
        return Err(ReportError::Disjoint {
            estimate: span(estimates),
            truth: span(truth),
            tolerance: ALIGNMENT_TOLERANCE,
        });
    }
    Ok(rows)
}

/// Length of the path through the recorded positions, m.
pub fn path_length(records: &[StateRecord]) -> Result<f64, NavError> {
    let mut total = 0.0;
    for w in records.windows(2) {
        let (a, b) = (w[0].position()?, w[1].position()?);
        total += b.difference(&a).component_mul(&LocalEarth::at(&a)?.curv_to_cart()).norm();
    }
    Ok(total)
}

/// Error as a percentage of distance traveled; `None` for a zero-length path.
pub fn drift_percent(error_m: f64, distance_m: f64) -> Option<f64> {
    (distance_m > 0.0).then(|| 100.0 * error_m / distance_m)
}

/// Start of the final stretch during which the heading error stays below
/// [`HEADING_CONVERGED_DEG`]. `None` if the last row is not converged.
pub fn heading_convergence_time(rows: &[ErrorRow]) -> Option<f64> {
    let ok = |r: &ErrorRow| r.heading_deg.abs() < HEADING_CONVERGED_DEG;
    match rows.iter().rposition(|r| !ok(r)) {
        None => rows.first().map(|r| r.t),
        Some(i) => rows.get(i + 1).map(|r| r.t),
    }
}

/// What final errors were measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Ground-truth trace; errors are 3-D.
    Truth,
    /// First GPS fix after the last resurfacing; errors are horizontal.
    Gps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub reference: Reference,
    /// Time the final error refers to.
    pub final_time_s: Option<f64>,
    pub final_position_error_m: Option<f64>,
    pub distance_traveled_m: f64,
    pub drift_percent: Option<f64>,
    pub heading_convergence_s: Option<f64>,
    pub counts: PerSensor<VerdictCounts>,
    /// Filter errors against GPS at each resurfacing, when replayed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surfacings: Vec<SurfacingFix>,
}

impl RunReport {
    /// Compares an estimate trace against truth.
    pub fn against_truth(estimates: &[StateRecord], truth: &[StateRecord]) -> Result<(Self, Vec<ErrorRow>), ReportError> {
        let rows = error_trace(estimates, truth)?;
        let distance = path_length(truth)?;
        let last = rows.last().expect("error trace is non-empty");
        let report = Self {
            reference: Reference::Truth,
            final_time_s: Some(last.t),
            final_position_error_m: Some(last.total_m),
            distance_traveled_m: distance,
            drift_percent: drift_percent(last.total_m, distance),
            heading_convergence_s: heading_convergence_time(&rows),
            counts: count_verdicts(estimates),
            surfacings: Vec::new(),
        };
        Ok((report, rows))
    }

    /// Summary of a replay without truth: the final error is the last
    /// resurfacing error and distance is the estimated path length.
    pub fn from_replay(output: &ReplayOutput) -> Result<Self, NavError> {
        let distance = output.estimated_path_length()?;
        let last = output.surfacings.last();
        let error = last.map(|s| s.horizontal_error_m);
        Ok(Self {
            reference: Reference::Gps,
            final_time_s: last.map(|s| s.t),
            final_position_error_m: error,
            distance_traveled_m: distance,
            drift_percent: error.and_then(|e| drift_percent(e, distance)),
            heading_convergence_s: None,
            counts: output.counts,
            surfacings: output.surfacings.clone(),
        })
    }
}

fn opt(v: Option<f64>, unit: &str, precision: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.precision$}{unit}"))
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reference = match self.reference {
            Reference::Truth => "truth",
            Reference::Gps => "GPS after resurfacing",
        };
        writeln!(f, "final position error: {} (vs {reference}, t = {})", opt(self.final_position_error_m, " m", 3), opt(self.final_time_s, " s", 2))?;
        writeln!(f, "distance traveled:    {:.1} m", self.distance_traveled_m)?;
        writeln!(f, "drift:                {}", opt(self.drift_percent, " %", 4))?;
        writeln!(f, "heading converged at: {}", opt(self.heading_convergence_s, " s", 2))?;
        write!(f, "sensor  accepted  rejected  dropped")?;
        for s in Sensor::ALL {
            let c = self.counts.get(s);
            write!(f, "\n{:<6}  {:>8}  {:>8}  {:>7}", s.name(), c.accepted, c.rejected, c.dropped)?;
        }
        for s in &self.surfacings {
            write!(f, "\nresurfaced at {:.2} s after {:.0} s without GPS: {:.3} m horizontal error", s.t, s.gap_s, s.horizontal_error_m)?;
        }
        Ok(())
    }
}

pub const ERROR_CSV_HEADER: &str = "t,north_m,east_m,down_m,horizontal_m,total_m,velocity_error_mps,heading_error_deg";

pub fn write_error_csv<W: Write>(writer: &mut W, rows: &[ErrorRow]) -> std::io::Result<()> {
    writeln!(writer, "{ERROR_CSV_HEADER}")?;
    for r in rows {
        let [n, e, d] = r.position_ned;
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            r.t, n, e, d, r.horizontal_m, r.total_m, r.velocity_mps, r.heading_deg
        )?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::CurvilinearPosition;
    use crate::so3::from_euler;
    use crate::strapdown::NavState;
    use nalgebra::Vector3;

    fn rec(t: f64, north: f64, heading_deg: f64) -> StateRecord {
        let origin = CurvilinearPosition::from_degrees(37.0, -80.0, 0.0).unwrap();
        let scale = LocalEarth::at(&origin).unwrap().cart_to_curv();
        let mut s = NavState::at_rest(origin.offset(&Vector3::new(north, 0.0, 0.0).component_mul(&scale)));
        s.attitude = from_euler(0.0, 0.0, heading_deg.to_radians());
        StateRecord::new(t, &s)
    }

    #[test]
    fn identical_traces_have_zero_error() {
        let truth: Vec<_> = (0..50).map(|k| rec(k as f64, 2.0 * k as f64, 30.0)).collect();
        let (report, rows) = RunReport::against_truth(&truth, &truth).unwrap();
        assert!(rows.iter().all(|r| r.total_m == 0.0 && r.heading_deg == 0.0));
        assert_eq!(report.drift_percent, Some(0.0));
        assert_eq!(report.heading_convergence_s, Some(0.0));
    }

    #[test]
    fn alignment_respects_tolerance() {
        let truth = vec![rec(0.0, 0.0, 0.0), rec(1.0, 0.0, 0.0)];
        let est = vec![rec(0.05, 0.0, 0.0), rec(0.5, 0.0, 0.0), rec(1.09, 0.0, 0.0)];
        let rows = error_trace(&est, &truth).unwrap();
        assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![0.05, 1.09]);
        let late = vec![rec(5.0, 0.0, 0.0)];
        assert!(matches!(error_trace(&late, &truth), Err(ReportError::Disjoint { .. })));
        assert!(matches!(error_trace(&[], &truth), Err(ReportError::Disjoint { .. })));
    }

    #[test]
    fn convergence_is_sustained_crossing() {
        let row = |t: f64, h: f64| ErrorRow { t, position_ned: [0.0; 3], horizontal_m: 0.0, total_m: 0.0, velocity_mps: 0.0, heading_deg: h };
        let rows = [row(0.0, 90.0), row(1.0, 1.0), row(2.0, -3.0), row(3.0, 1.5), row(4.0, -0.5)];
        assert_eq!(heading_convergence_time(&rows), Some(3.0));
        assert_eq!(heading_convergence_time(&rows[..3]), None);
        assert_eq!(heading_convergence_time(&[]), None);
    }

    #[test]
    fn heading_error_wraps() {
        let rows = error_trace(&[rec(0.0, 0.0, 179.0)], &[rec(0.0, 0.0, -179.0)]).unwrap();
        assert!((rows[0].heading_deg + 2.0).abs() < 1e-9);
    }
}
