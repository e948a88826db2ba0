//! JSON Lines log records shared by sensor logs and state traces.
//!
//! Every line is one object with a `t` field in seconds and a `kind` tag.
//! Vectors are arrays in SI units, angles in radians, positions are
//! `[latitude, longitude, altitude]`.

use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::NavError;
use crate::geodesy::CurvilinearPosition;
use crate::navigator::{Event, VerdictRecord};
use crate::sensors::{Measurement, Observation};
use crate::so3::{to_euler, Rotation};
use crate::strapdown::{ImuSample, NavState};
use crate::ukfm::{Covariance, STATE_DIM};

/// Navigation state at an instant, as written to truth and estimate traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub t: f64,
    /// Body-to-navigation rotation, row-major.
    pub attitude: [[f64; 3]; 3],
    /// Roll, pitch, heading.
    pub euler: [f64; 3],
    pub velocity: [f64; 3],
    pub position: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_diagonal: Option<[f64; STATE_DIM]>,
    /// Measurement verdicts since the previous record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictRecord>,
}

impl StateRecord {
    pub fn new(t: f64, state: &NavState) -> Self {
        let m = state.attitude.matrix();
        let e = to_euler(&state.attitude);
        let p = &state.position;
        Self {
            t,
            attitude: [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]),
            euler: [e.roll, e.pitch, e.heading],
            velocity: state.velocity.into(),
            position: [p.latitude, p.longitude, p.altitude],
            gyro_bias: state.gyro_bias.into(),
            accel_bias: state.accel_bias.into(),
            covariance_diagonal: None,
            verdicts: Vec::new(),
        }
    }

    pub fn with_covariance(mut self, p: &Covariance) -> Self {
        self.covariance_diagonal = Some(std::array::from_fn(|i| p[(i, i)]));
        self
    }

    pub fn position(&self) -> Result<CurvilinearPosition, NavError> {
        CurvilinearPosition::new(self.position[0], self.position[1], self.position[2])
    }

    pub fn heading(&self) -> f64 {
        self.euler[2]
    }

    pub fn state(&self) -> Result<NavState, NavError> {
        let m = Matrix3::from_fn(|i, j| self.attitude[i][j]);
        let projected = Rotation::from_matrix(m).ok_or(NavError::InvalidConfig(format!(
            "attitude at t = {} s is not a rotation matrix",
            self.t
        )))?;
        // Keep the stored matrix bit-exact unless it needs projecting.
        let attitude = if Rotation::from_matrix_unchecked(m).orthonormality_residual() < 1e-12 {
            Rotation::from_matrix_unchecked(m)
        } else {
            projected
        };
        let state = NavState {
            attitude,
            velocity: Vector3::from(self.velocity),
            position: self.position()?,
            gyro_bias: Vector3::from(self.gyro_bias),
            accel_bias: Vector3::from(self.accel_bias),
        };
        if !state.is_finite() {
            return Err(NavError::NonFinite("state record"));
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LogRecord {
    Imu { t: f64, angular_rate: [f64; 3], specific_force: [f64; 3] },
    Dvl { t: f64, velocity: [f64; 3] },
    Depth { t: f64, depth: f64 },
    Gps { t: f64, position: [f64; 3] },
    Range { t: f64, range: f64, transmitter: [f64; 3] },
    Truth(StateRecord),
    Estimate(StateRecord),
}

fn position_array(p: &CurvilinearPosition) -> [f64; 3] {
    [p.latitude, p.longitude, p.altitude]
}

fn position_from(a: &[f64; 3]) -> Result<CurvilinearPosition, NavError> {
    CurvilinearPosition::new(a[0], a[1], a[2])
}

impl LogRecord {
    pub fn t(&self) -> f64 {
        match self {
            LogRecord::Imu { t, .. }
            | LogRecord::Dvl { t, .. }
            | LogRecord::Depth { t, .. }
            | LogRecord::Gps { t, .. }
            | LogRecord::Range { t, .. } => *t,
            LogRecord::Truth(s) | LogRecord::Estimate(s) => s.t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LogRecord::Imu { .. } => "imu",
            LogRecord::Dvl { .. } => "dvl",
            LogRecord::Depth { .. } => "depth",
            LogRecord::Gps { .. } => "gps",
            LogRecord::Range { .. } => "range",
            LogRecord::Truth(_) => "truth",
            LogRecord::Estimate(_) => "estimate",
        }
    }

    pub fn from_event(event: &Event) -> Self {
        match event {
            Event::Imu(s) => LogRecord::Imu {
                t: s.timestamp,
                angular_rate: s.angular_rate.into(),
                specific_force: s.specific_force.into(),
            },
            Event::Measurement(m) => {
                let t = m.timestamp;
                match m.observation {
                    Observation::Dvl { velocity } => LogRecord::Dvl { t, velocity: velocity.into() },
                    Observation::Depth { depth } => LogRecord::Depth { t, depth },
                    Observation::Gps { position } => LogRecord::Gps { t, position: position_array(&position) },
                    Observation::Range { range, transmitter } => {
                        LogRecord::Range { t, range, transmitter: position_array(&transmitter) }
                    }
                }
            }
        }
    }

    /// The sensor event carried by this record; `None` for state traces.
    pub fn to_event(&self) -> Result<Option<Event>, NavError> {
        let measurement = |t: f64, observation| Measurement::new(t, observation).map(|m| Some(Event::Measurement(m)));
        match self {
            LogRecord::Imu { t, angular_rate, specific_force } => {
                let sample = ImuSample {
                    timestamp: *t,
                    angular_rate: Vector3::from(*angular_rate),
                    specific_force: Vector3::from(*specific_force),
                };
                let finite = t.is_finite()
                    && sample.angular_rate.iter().chain(sample.specific_force.iter()).all(|v| v.is_finite());
                if !finite {
                    return Err(NavError::NonFinite("IMU record"));
                }
                Ok(Some(Event::Imu(sample)))
            }
            LogRecord::Dvl { t, velocity } => measurement(*t, Observation::Dvl { velocity: Vector3::from(*velocity) }),
            LogRecord::Depth { t, depth } => measurement(*t, Observation::Depth { depth: *depth }),
            LogRecord::Gps { t, position } => measurement(*t, Observation::Gps { position: position_from(position)? }),
            LogRecord::Range { t, range, transmitter } => {
                measurement(*t, Observation::Range { range: *range, transmitter: position_from(transmitter)? })
            }
            LogRecord::Truth(_) | LogRecord::Estimate(_) => Ok(None),
        }
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Io { line: usize, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: t = {t} s precedes the previous record at {previous} s")]
    OutOfOrder { line: usize, t: f64, previous: f64 },
}

impl RecordError {
    pub fn line(&self) -> usize {
        match self {
            RecordError::Io { line, .. } | RecordError::Malformed { line, .. } | RecordError::OutOfOrder { line, .. } => {
                *line
            }
        }
    }
}

fn for_each_record<R: BufRead>(
    reader: R,
    mut f: impl FnMut(usize, LogRecord) -> Result<(), RecordError>,
) -> Result<(), RecordError> {
    let mut previous = f64::NEG_INFINITY;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| RecordError::Io { line: line_no, source })?;
        if text.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&text)
            .map_err(|e| RecordError::Malformed { line: line_no, message: e.to_string() })?;
        let t = record.t();
        if !t.is_finite() {
            return Err(RecordError::Malformed { line: line_no, message: "non-finite timestamp".into() });
        }
        if t < previous {
            return Err(RecordError::OutOfOrder { line: line_no, t, previous });
        }
        previous = t;
        f(line_no, record)?;
    }
    Ok(())
}

/// Reads a JSON Lines log. Blank lines are skipped; timestamps must be
/// finite and non-decreasing.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<LogRecord>, RecordError> {
    let mut records = Vec::new();
    for_each_record(reader, |_, r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}

/// Reads the sensor events of a log, skipping state traces.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<Event>, RecordError> {
    let mut events = Vec::new();
    for_each_record(reader, |line, r| {
        let event = r.to_event().map_err(|e| RecordError::Malformed { line, message: e.to_string() })?;
        events.extend(event);
        Ok(())
    })?;
    Ok(events)
}

pub fn write_record<W: Write>(writer: &mut W, record: &LogRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *writer, record)?;
    writer.write_all(b"\n")
}

pub fn write_records<'a, W: Write>(
    writer: &mut W,
    records: impl IntoIterator<Item = &'a LogRecord>,
) -> std::io::Result<()> {
    for r in records {
        write_record(writer, r)?;
    }
    writer.flush()
}
