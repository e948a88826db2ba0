//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's geodesy or filter code paths under test.

#![allow(dead_code)]

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

pub const A: f64 = 6_378_137.0;
pub const E2: f64 = 6.694_379_990_14e-3;
pub const OMEGA_IE: f64 = 7.292_115e-5;
const G_EQUATOR: f64 = 9.780_325_335_9;
const G_POLE: f64 = 9.832_184_937_8;
const B: f64 = 6_356_752.314_245;

/// Meridian and transverse radii from the WGS-84 closed forms.
pub fn radii(lat: f64) -> (f64, f64) {
    let w = 1.0 - E2 * lat.sin().powi(2);
    (A * (1.0 - E2) / w.powf(1.5), A / w.sqrt())
}

/// Somigliana normal gravity written with the polar value, plus free-air term.
pub fn gravity_down(lat: f64, h: f64) -> f64 {
    let (s2, c2) = (lat.sin().powi(2), lat.cos().powi(2));
    let surface = (A * G_EQUATOR * c2 + B * G_POLE * s2) / (A * A * c2 + B * B * s2).sqrt();
    surface - 3.086e-6 * h
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula.
pub fn rodrigues(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    if theta < 1e-12 {
        return Matrix3::identity() + skew(phi);
    }
    let k = skew(&(phi / theta));
    Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Rotation angle between two rotation matrices.
pub fn angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a * b.transpose()).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

/// Continuous-time navigation state: attitude matrix, NED velocity, and
/// `[latitude, longitude, altitude]`.
#[derive(Debug, Clone, Copy)]
pub struct OdeState {
    pub c: Matrix3<f64>,
    pub v: Vector3<f64>,
    pub p: Vector3<f64>,
}

impl OdeState {
    fn axpy(&self, h: f64, d: &OdeState) -> OdeState {
        OdeState { c: self.c + d.c * h, v: self.v + d.v * h, p: self.p + d.p * h }
    }

    /// NED meters from `other` to `self`, scaled at `other`.
    pub fn position_error(&self, other: &OdeState) -> Vector3<f64> {
        let (rn, re) = radii(other.p.x);
        let d = self.p - other.p;
        Vector3::new(d.x * (rn + other.p.z), d.y * (re + other.p.z) * other.p.x.cos(), -d.z)
    }
}

fn derivative(s: &OdeState, w: &Vector3<f64>, f: &Vector3<f64>) -> OdeState {
    let (lat, h) = (s.p.x, s.p.z);
    let (rn, re) = radii(lat);
    let w_ie = Vector3::new(OMEGA_IE * lat.cos(), 0.0, -OMEGA_IE * lat.sin());
    let w_en = Vector3::new(s.v.y / (re + h), -s.v.x / (rn + h), -s.v.y * lat.tan() / (re + h));
    let g = Vector3::new(0.0, 0.0, gravity_down(lat, h));
    OdeState {
        c: s.c * skew(w) - skew(&(w_ie + w_en)) * s.c,
        v: s.c * f + g - (skew(&w_en) + skew(&w_ie) * 2.0) * s.v,
        p: Vector3::new(s.v.x / (rn + h), s.v.y / ((re + h) * lat.cos()), -s.v.z),
    }
}

/// Classical RK4 on the navigation equations from `t0` to `t1` with inputs
/// given as continuous functions of time.
pub fn integrate(
    s0: &OdeState,
    t0: f64,
    t1: f64,
    step: f64,
    inputs: &impl Fn(f64) -> (Vector3<f64>, Vector3<f64>),
) -> OdeState {
    let n = ((t1 - t0) / step).round() as usize;
    let h = (t1 - t0) / n as f64;
    let mut s = *s0;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let (w0, f0) = inputs(t);
        let (wm, fm) = inputs(t + h / 2.0);
        let (w1, f1) = inputs(t + h);
        let k1 = derivative(&s, &w0, &f0);
        let k2 = derivative(&s.axpy(h / 2.0, &k1), &wm, &fm);
        let k3 = derivative(&s.axpy(h / 2.0, &k2), &wm, &fm);
        let k4 = derivative(&s.axpy(h, &k3), &w1, &f1);
        s = OdeState {
            c: s.c + (k1.c + k2.c * 2.0 + k3.c * 2.0 + k4.c) * (h / 6.0),
            v: s.v + (k1.v + k2.v * 2.0 + k3.v * 2.0 + k4.v) * (h / 6.0),
            p: s.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * (h / 6.0),
        };
    }
    s
}

/// `a + b sin(c t + d)` per axis.
#[derive(Debug, Clone, Copy)]
pub struct Sinusoids(pub [[f64; 4]; 3]);

impl Sinusoids {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let [a, b, c, d] = self.0[i];
            a + b * (c * t + d).sin()
        })
    }

    /// Exact mean over `[t0, t1]`.
    pub fn mean(&self, t0: f64, t1: f64) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let [a, b, c, d] = self.0[i];
            a + b * ((c * t0 + d).cos() - (c * t1 + d).cos()) / (c * (t1 - t0))
        })
    }
}

/// Smooth body rates and specific forces for a gently manoeuvring vehicle.
pub fn smooth_inputs() -> (Sinusoids, Sinusoids) {
    let w = Sinusoids([[0.0, 0.05, 0.7, 0.0], [0.0, 0.04, 0.5, 1.0], [0.02, 0.1, 0.3, 0.5]]);
    let f = Sinusoids([[0.0, 0.4, 0.4, 0.0], [0.0, 0.3, 0.25, 2.0], [-9.8, 0.2, 0.6, 1.0]]);
    (w, f)
}

/// Closed-form Kalman filter prediction.
pub fn kf_predict<const D: usize>(
    x: &SVector<f64, D>,
    p: &SMatrix<f64, D, D>,
    f: &SMatrix<f64, D, D>,
    q: &SMatrix<f64, D, D>,
) -> (SVector<f64, D>, SMatrix<f64, D, D>) {
    (f * x, f * p * f.transpose() + q)
}

/// Closed-form Kalman filter update.
pub fn kf_update<const D: usize, const M: usize>(
    x: &SVector<f64, D>,
    p: &SMatrix<f64, D, D>,
    z: &SVector<f64, M>,
    h: &SMatrix<f64, M, D>,
    r: &SMatrix<f64, M, M>,
) -> (SVector<f64, D>, SMatrix<f64, D, D>) {
    let s = h * p * h.transpose() + r;
    let k = p * h.transpose() * s.try_inverse().expect("invertible innovation covariance");
    (x + k * (z - h * x), p - k * s * k.transpose())
}

/// Random symmetric positive-definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd<const D: usize>(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> SMatrix<f64, D, D> {
    let g = nalgebra::DMatrix::<f64>::from_fn(D, D, |_, _| rng.random_range(-1.0..1.0));
    let q: SMatrix<f64, D, D> = g.qr().q().fixed_view::<D, D>(0, 0).into_owned();
    let d = SVector::<f64, D>::from_fn(|_, _| rng.random_range(lo..hi));
    q * SMatrix::from_diagonal(&d) * q.transpose()
}

/// Central 95 % interval of the chi-square distribution with `k` degrees of freedom.
pub fn chi_square_interval(k: f64) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let d = ChiSquared::new(k).expect("positive degrees of freedom");
    (d.inverse_cdf(0.025), d.inverse_cdf(0.975))
}
