//! Drifting acoustic transmitter track.

use nalgebra::Vector3;
use rand::Rng;

use super::config::TransmitterSpec;
use crate::error::Result;
use crate::geodesy::{CurvilinearPosition, LocalEarth};

const COMPONENTS: usize = 3;
const MIN_PERIOD_S: f64 = 600.0;
const MAX_PERIOD_S: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Wave {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

/// Slow drift about a mean position: a sum of sinusoids per horizontal axis
/// whose amplitudes bound the speed by `max_speed_mps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    origin: CurvilinearPosition,
    scale: Vector3<f64>,
    mean: [f64; 2],
    depth: f64,
    waves: [[Wave; COMPONENTS]; 2],
}

impl Transmitter {
    pub fn new<R: Rng>(origin: &CurvilinearPosition, spec: &TransmitterSpec, rng: &mut R) -> Result<Self> {
        let per_axis = spec.max_speed_mps / std::f64::consts::SQRT_2;
        let mut waves = [[Wave { amplitude: 0.0, omega: 0.0, phase: 0.0 }; COMPONENTS]; 2];
        for axis in &mut waves {
            let mut weights = [0.0; COMPONENTS];
            for (w, weight) in axis.iter_mut().zip(weights.iter_mut()) {
                let period = rng.random_range(MIN_PERIOD_S..MAX_PERIOD_S);
                w.omega = 2.0 * std::f64::consts::PI / period;
                w.phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                *weight = rng.random_range(0.1..1.0);
            }
            let total: f64 = weights.iter().sum();
            for (w, weight) in axis.iter_mut().zip(weights) {
                w.amplitude = per_axis * weight / total / w.omega;
            }
        }
        Ok(Self {
            origin: *origin,
            scale: LocalEarth::at(origin)?.cart_to_curv(),
            mean: spec.offset_m,
            depth: spec.depth_m,
            waves,
        })
    }

    /// NED offset from the mission origin, meters.
    pub fn offset(&self, t: f64) -> Vector3<f64> {
        let axis = |i: usize| -> f64 {
            self.mean[i] + self.waves[i].iter().map(|w| w.amplitude * (w.omega * t + w.phase).sin()).sum::<f64>()
        };
        Vector3::new(axis(0), axis(1), self.depth)
    }

    /// NED velocity, m/s.
    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let axis = |i: usize| -> f64 {
            self.waves[i].iter().map(|w| w.amplitude * w.omega * (w.omega * t + w.phase).cos()).sum::<f64>()
        };
        Vector3::new(axis(0), axis(1), 0.0)
    }

    pub fn position(&self, t: f64) -> CurvilinearPosition {
        self.origin.offset(&self.scale.component_mul(&self.offset(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn speed_is_bounded() {
        let origin = CurvilinearPosition::from_degrees(37.0, -80.6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tx = Transmitter::new(&origin, &TransmitterSpec::default(), &mut rng).unwrap();
        let mut fastest: f64 = 0.0;
        for k in 0..10_000 {
            fastest = fastest.max(tx.velocity(k as f64).norm());
        }
        assert!(fastest <= 0.3 + 1e-12 && fastest > 0.05, "{fastest}");
        assert!(tx.position(0.0).altitude < origin.altitude);
    }
}
