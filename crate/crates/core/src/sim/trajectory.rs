//! Kinematic ground truth.
//!
//! The horizontal path is a chain of legs, each giving speed and heading as
//! analytic functions of time. Depth follows separate smooth ramps. Velocity,
//! acceleration, attitude and body rates are therefore exact; latitude and
//! longitude are integrated with RK4 on the IMU grid and interpolated with
//! cubic Hermite polynomials in between.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::config::MissionConfig;
use crate::error::{NavError, Result};
use crate::geodesy::{self, CurvilinearPosition, LocalEarth};
use crate::so3::{from_euler, Rotation};
use crate::strapdown::NavState;

/// First zero of the Bessel function J0. A heading oscillation of this
/// amplitude has zero mean drift over each period, so the path closes.
pub const FIGURE_EIGHT_AMPLITUDE: f64 = 2.404_825_557_695_773;

/// Depth below which GPS is unavailable, m.
pub const GPS_DEPTH_LIMIT: f64 = 0.5;

fn smoothstep(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

/// Integral of smoothstep from 0 to u.
fn smoothstep_integral(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (1.0 - 0.5 * u)
}

fn smootherstep(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let u2 = u * u;
    (
        u2 * u * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - u) * (1.0 - u),
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Constant { speed: f64 },
    SpeedRamp { from: f64, to: f64 },
    FigureEight { speed: f64, omega: f64 },
    /// Half turn at peak rate `rate` (signed), with smoothstep ramps.
    Turn { speed: f64, rate: f64, ramp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    start: f64,
    duration: f64,
    heading0: f64,
    profile: Profile,
}

/// Horizontal speed and heading with their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizontal {
    pub speed: f64,
    pub speed_rate: f64,
    pub heading: f64,
    pub heading_rate: f64,
}

impl Leg {
    fn end(&self) -> f64 {
        self.start + self.duration
    }

    fn eval(&self, t: f64) -> Horizontal {
        let tau = t - self.start;
        match self.profile {
            Profile::Constant { speed } => Horizontal { speed, speed_rate: 0.0, heading: self.heading0, heading_rate: 0.0 },
            Profile::SpeedRamp { from, to } => {
                let (s, ds) = smoothstep(tau / self.duration);
                Horizontal {
                    speed: from + (to - from) * s,
                    speed_rate: if tau < self.duration { (to - from) * ds / self.duration } else { 0.0 },
                    heading: self.heading0,
                    heading_rate: 0.0,
                }
            }
            Profile::FigureEight { speed, omega } => {
                let (s, c) = (omega * tau).sin_cos();
                Horizontal {
                    speed,
                    speed_rate: 0.0,
                    heading: self.heading0 + FIGURE_EIGHT_AMPLITUDE * (1.0 - c),
                    heading_rate: FIGURE_EIGHT_AMPLITUDE * omega * s,
                }
            }
            Profile::Turn { speed, rate, ramp } => {
                let tau = tau.clamp(0.0, self.duration);
                let d = self.duration;
                let (shape, integral) = if tau < ramp {
                    (smoothstep(tau / ramp).0, ramp * smoothstep_integral(tau / ramp))
                } else if tau <= d - ramp {
                    (1.0, 0.5 * ramp + (tau - ramp))
                } else {
                    let back = (d - tau) / ramp;
                    (smoothstep(back).0, (d - ramp) - ramp * smoothstep_integral(back))
                };
                Horizontal { speed, speed_rate: 0.0, heading: self.heading0 + rate * integral, heading_rate: rate * shape }
            }
        }
    }

    fn final_heading(&self) -> f64 {
        match self.profile {
            Profile::Turn { rate, ramp, .. } => self.heading0 + rate * (self.duration - ramp),
            _ => self.heading0,
        }
    }

    fn final_speed(&self) -> f64 {
        match self.profile {
            Profile::Constant { speed } | Profile::FigureEight { speed, .. } | Profile::Turn { speed, .. } => speed,
            Profile::SpeedRamp { to, .. } => to,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DepthRamp {
    start: f64,
    duration: f64,
    from: f64,
    to: f64,
}

/// Mission phase boundaries, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Phases {
    /// End of the surface figure-eight.
    pub alignment_end: Option<f64>,
    /// Start of the first swath, where the dive begins.
    pub dive_start: Option<f64>,
    /// End of the last swath, where the ascent begins.
    pub ascent_start: Option<f64>,
    pub end: f64,
}

/// True vehicle motion at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: CurvilinearPosition,
    pub velocity: Vector3<f64>,
    /// Time derivative of the NED velocity.
    pub acceleration: Vector3<f64>,
    pub attitude: Rotation,
    /// Body rate relative to the navigation frame, body axes.
    pub omega_nb_b: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    origin: CurvilinearPosition,
    legs: Vec<Leg>,
    depth_ramps: Vec<DepthRamp>,
    rate: f64,
    /// Latitude, longitude and their rates on the IMU grid.
    grid: Vec<[f64; 4]>,
    phases: Phases,
}

struct Builder {
    legs: Vec<Leg>,
    t: f64,
    heading: f64,
    speed: f64,
}

impl Builder {
    fn push(&mut self, duration: f64, profile: Profile) {
        if duration <= 0.0 {
            return;
        }
        let leg = Leg { start: self.t, duration, heading0: self.heading, profile };
        self.t = leg.end();
        self.heading = leg.final_heading();
        self.speed = leg.final_speed();
        self.legs.push(leg);
    }

    fn ramp_to(&mut self, speed: f64, duration: f64) {
        if (speed - self.speed).abs() > 0.0 {
            self.push(duration, Profile::SpeedRamp { from: self.speed, to: speed });
        }
    }
}

impl Trajectory {
    pub fn new(cfg: &MissionConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.figure_eight.is_none() && cfg.lawnmower.is_none() && cfg.duration_s.is_none() {
            return Err(NavError::InvalidConfig("a mission without patterns needs duration_s".into()));
        }
        let origin = cfg.origin.position()?;
        let mut b = Builder { legs: Vec::new(), t: 0.0, heading: cfg.initial_heading_deg.to_radians(), speed: 0.0 };
        let mut phases = Phases::default();
        let mut depth_ramps = Vec::new();

        if cfg.figure_eight.is_some() || cfg.lawnmower.is_some() {
            b.push(cfg.initial_hold_s, Profile::Constant { speed: 0.0 });
        }
        if let Some(f8) = &cfg.figure_eight {
            let periods = f8.periods();
            if periods > 0 {
                b.ramp_to(f8.speed(), cfg.speed_ramp_s);
                let omega = 2.0 * PI / f8.period_s;
                b.push(periods as f64 * f8.period_s, Profile::FigureEight { speed: f8.speed(), omega });
                phases.alignment_end = Some(b.t);
            }
        }
        if let Some(lm) = &cfg.lawnmower {
            b.ramp_to(lm.speed_mps, cfg.speed_ramp_s);
            let swath = lm.swath_length_m / lm.speed_mps;
            let peak_rate = lm.speed_mps / (lm.swath_spacing_m / 2.0);
            let turn = PI / peak_rate + lm.turn_ramp_s;
            phases.dive_start = Some(b.t);
            depth_ramps.push(DepthRamp { start: b.t, duration: lm.dive_s, from: 0.0, to: lm.depth_m });
            for i in 0..lm.swath_count {
                b.push(swath, Profile::Constant { speed: lm.speed_mps });
                if i + 1 < lm.swath_count {
                    let rate = if i % 2 == 0 { peak_rate } else { -peak_rate };
                    b.push(turn, Profile::Turn { speed: lm.speed_mps, rate, ramp: lm.turn_ramp_s });
                }
            }
            phases.ascent_start = Some(b.t);
            depth_ramps.push(DepthRamp { start: b.t, duration: lm.ascent_s, from: lm.depth_m, to: 0.0 });
            b.push(lm.ascent_s + lm.surface_hold_s, Profile::Constant { speed: lm.speed_mps });
        }
        let pattern_end = b.t;
        let end = cfg.duration_s.unwrap_or(pattern_end);
        if end > pattern_end || b.legs.is_empty() {
            let speed = b.speed;
            b.push((end - pattern_end).max(f64::MIN_POSITIVE), Profile::Constant { speed });
        }
        phases.end = end;

        let mut traj = Self { origin, legs: b.legs, depth_ramps, rate: cfg.imu_rate_hz, grid: Vec::new(), phases };
        traj.integrate()?;
        Ok(traj)
    }

    fn ticks(&self) -> usize {
        (self.phases.end * self.rate + 1e-9).floor() as usize
    }

    pub fn tick_time(&self, k: usize) -> f64 {
        k as f64 / self.rate
    }

    pub fn phases(&self) -> &Phases {
        &self.phases
    }

    pub fn duration(&self) -> f64 {
        self.phases.end
    }

    pub fn imu_rate(&self) -> f64 {
        self.rate
    }

    pub fn origin(&self) -> &CurvilinearPosition {
        &self.origin
    }

    fn leg_at(&self, t: f64) -> &Leg {
        let i = self.legs.partition_point(|leg| leg.start <= t);
        &self.legs[i.saturating_sub(1)]
    }

    pub fn horizontal(&self, t: f64) -> Horizontal {
        self.leg_at(t).eval(t)
    }

    /// Depth of the body origin below the origin altitude, with its first two
    /// derivatives.
    pub fn depth(&self, t: f64) -> (f64, f64, f64) {
        let i = self.depth_ramps.partition_point(|r| r.start <= t);
        if i == 0 {
            return (0.0, 0.0, 0.0);
        }
        let r = &self.depth_ramps[i - 1];
        let u = (t - r.start) / r.duration;
        if u >= 1.0 {
            return (r.to, 0.0, 0.0);
        }
        let (s, ds, dds) = smootherstep(u);
        let span = r.to - r.from;
        (r.from + span * s, span * ds / r.duration, span * dds / (r.duration * r.duration))
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let h = self.horizontal(t);
        let (_, d_rate, _) = self.depth(t);
        let (s, c) = h.heading.sin_cos();
        Vector3::new(h.speed * c, h.speed * s, d_rate)
    }

    fn altitude(&self, t: f64) -> f64 {
        self.origin.altitude - self.depth(t).0
    }

    fn lat_lon_rate(&self, t: f64, lat: f64) -> Result<[f64; 2]> {
        let v = self.velocity(t);
        let h = self.altitude(t);
        let (r_n, r_e) = geodesy::principal_radii(lat)?;
        Ok([v.x / (r_n + h), v.y / ((r_e + h) * lat.cos())])
    }

    fn integrate(&mut self) -> Result<()> {
        let n = self.ticks();
        let dt = 1.0 / self.rate;
        let mut grid = Vec::with_capacity(n + 1);
        let (mut lat, mut lon) = (self.origin.latitude, self.origin.longitude);
        for k in 0..=n {
            let t = self.tick_time(k);
            let k1 = self.lat_lon_rate(t, lat)?;
            grid.push([lat, lon, k1[0], k1[1]]);
            if k == n {
                break;
            }
            let k2 = self.lat_lon_rate(t + 0.5 * dt, lat + 0.5 * dt * k1[0])?;
            let k3 = self.lat_lon_rate(t + 0.5 * dt, lat + 0.5 * dt * k2[0])?;
            let k4 = self.lat_lon_rate(t + dt, lat + dt * k3[0])?;
            lat += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            lon += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        self.grid = grid;
        Ok(())
    }

    pub fn position(&self, t: f64) -> CurvilinearPosition {
        let dt = 1.0 / self.rate;
        let last = self.grid.len() - 1;
        let k = ((t * self.rate).floor().max(0.0) as usize).min(last.saturating_sub(1));
        let a = &self.grid[k];
        let (lat, lon) = if last == 0 {
            (a[0], a[1])
        } else {
            let b = &self.grid[k + 1];
            let s = (t - self.tick_time(k)) / dt;
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            let interp = |i: usize| h00 * a[i] + h10 * dt * a[i + 2] + h01 * b[i] + h11 * dt * b[i + 2];
            (interp(0), interp(1))
        };
        CurvilinearPosition { latitude: lat, longitude: geodesy::wrap_angle(lon), altitude: self.altitude(t) }
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let h = self.horizontal(t);
        let (_, d_rate, d_accel) = self.depth(t);
        let (s, c) = h.heading.sin_cos();
        let velocity = Vector3::new(h.speed * c, h.speed * s, d_rate);
        let acceleration = Vector3::new(
            h.speed_rate * c - h.speed * h.heading_rate * s,
            h.speed_rate * s + h.speed * h.heading_rate * c,
            d_accel,
        );
        let denom = h.speed * h.speed + d_rate * d_rate;
        let (pitch, pitch_rate) = if denom > 0.0 {
            ((-d_rate).atan2(h.speed), (-d_accel * h.speed + d_rate * h.speed_rate) / denom)
        } else {
            (0.0, 0.0)
        };
        let (sp, cp) = pitch.sin_cos();
        Kinematics {
            position: self.position(t),
            velocity,
            acceleration,
            attitude: from_euler(0.0, pitch, h.heading),
            omega_nb_b: Vector3::new(-h.heading_rate * sp, pitch_rate, h.heading_rate * cp),
        }
    }

    /// True angular rate and specific force (no bias, no noise), body axes.
    pub fn inertial(&self, t: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let k = self.kinematics(t);
        let earth = LocalEarth::at(&k.position)?;
        let omega_ie = earth.earth_rate();
        let omega_en = earth.transport_rate(&k.velocity);
        let c = k.attitude.matrix();
        let omega_ib_b = k.omega_nb_b + c.tr_mul(&(omega_ie + omega_en));
        let f_n = k.acceleration - earth.gravity_vector() + (omega_en + omega_ie * 2.0).cross(&k.velocity);
        Ok((omega_ib_b, c.tr_mul(&f_n)))
    }

    /// Interval averages of angular rate and specific force over `(t0, t1]`
    /// by three-point Gauss-Legendre quadrature.
    pub fn interval_average(&self, t0: f64, t1: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let mid = 0.5 * (t0 + t1);
        let half = 0.5 * (t1 - t0);
        let offset = half * (0.6f64).sqrt();
        let mut w = Vector3::zeros();
        let mut f = Vector3::zeros();
        for (node, weight) in [(mid - offset, 5.0 / 18.0), (mid, 8.0 / 18.0), (mid + offset, 5.0 / 18.0)] {
            let (wi, fi) = self.inertial(node)?;
            w += wi * weight;
            f += fi * weight;
        }
        Ok((w, f))
    }

    /// True navigation state with the given biases.
    pub fn state(&self, t: f64, gyro_bias: Vector3<f64>, accel_bias: Vector3<f64>) -> NavState {
        let k = self.kinematics(t);
        NavState { attitude: k.attitude, velocity: k.velocity, position: k.position, gyro_bias, accel_bias }
    }

    /// Number of IMU ticks after t = 0.
    pub fn tick_count(&self) -> usize {
        self.grid.len() - 1
    }
}
