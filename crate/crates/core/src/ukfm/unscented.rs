//! Unscented transform on manifolds.
//!
//! Uncertainty lives in the tangent space at the current estimate. Sigma points
//! are produced by retracting `+-sqrt(d + lambda) L e_j` (with `P = L L^T`) onto
//! the manifold, pushed through the nonlinear map, and pulled back with the
//! inverse retraction. Weights follow the scaled transform with
//! `lambda = (alpha^2 - 1) d`.

use nalgebra::{SMatrix, SVector};

use crate::error::{NavError, Result};

/// A state space with a retraction and its local inverse.
pub trait Manifold<const D: usize>: Sized {
    /// Maps a tangent vector at `self` onto the manifold.
    fn retract(&self, xi: &SVector<f64, D>) -> Result<Self>;
    /// Tangent vector at `self` that retracts onto `other`.
    fn inverse_retract(&self, other: &Self) -> Result<SVector<f64, D>>;
}

/// Euclidean space, where retraction is plain addition.
impl<const D: usize> Manifold<D> for SVector<f64, D> {
    fn retract(&self, xi: &SVector<f64, D>) -> Result<Self> {
        Ok(self + xi)
    }

    fn inverse_retract(&self, other: &Self) -> Result<SVector<f64, D>> {
        Ok(other - self)
    }
}

/// Scaled unscented transform weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaWeights {
    pub dim: usize,
    pub alpha_sq: f64,
    /// sqrt(d + lambda)
    pub spread: f64,
    /// Weight of each of the 2d outer points.
    pub wj: f64,
    /// Mean weight of the central point.
    pub wm: f64,
    /// Covariance weight of the central point.
    pub w0: f64,
}

impl SigmaWeights {
    pub fn new(dim: usize, alpha_sq: f64) -> Result<Self> {
        if dim == 0 || !(alpha_sq > 0.0 && alpha_sq <= 1.0) {
            return Err(NavError::InvalidConfig(format!(
                "sigma-point spread alpha^2 = {alpha_sq} must lie in (0, 1]"
            )));
        }
        let d = dim as f64;
        let lambda = (alpha_sq - 1.0) * d;
        Ok(Self {
            dim,
            alpha_sq,
            spread: (d + lambda).sqrt(),
            wj: 1.0 / (2.0 * (d + lambda)),
            wm: lambda / (d + lambda),
            w0: lambda / (d + lambda) + 3.0 - alpha_sq,
        })
    }

    /// Sum of the mean weights (always one).
    pub fn mean_weight_sum(&self) -> f64 {
        self.wm + 2.0 * self.dim as f64 * self.wj
    }
}

/// The 2d + 1 sigma points around a center.
#[derive(Debug, Clone)]
pub struct SigmaPoints<S, const D: usize> {
    pub center: S,
    /// Scaled Cholesky columns; point `plus[j]` retracts `offsets[j]`,
    /// `minus[j]` retracts its negative.
    pub offsets: Vec<SVector<f64, D>>,
    pub plus: Vec<S>,
    pub minus: Vec<S>,
}

impl<S, const D: usize> SigmaPoints<S, D> {
    pub fn len(&self) -> usize {
        1 + self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Symmetric part of a square matrix.
pub fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

pub fn sigma_points<S, const D: usize>(
    x: &S,
    p: &SMatrix<f64, D, D>,
    weights: &SigmaWeights,
) -> Result<SigmaPoints<S, D>>
where
    S: Manifold<D> + Clone,
{
    let chol = p.cholesky().ok_or(NavError::CovarianceNotPositiveDefinite)?;
    let l = chol.l();
    let mut offsets = Vec::with_capacity(D);
    let mut plus = Vec::with_capacity(D);
    let mut minus = Vec::with_capacity(D);
    for j in 0..D {
        let xi: SVector<f64, D> = l.column(j) * weights.spread;
        plus.push(x.retract(&xi)?);
        minus.push(x.retract(&-xi)?);
        offsets.push(xi);
    }
    Ok(SigmaPoints { center: x.clone(), offsets, plus, minus })
}

/// Pushes `(x, P)` through `f`. The new mean is `f(x)`; the covariance is the
/// weighted spread of the propagated points around it, plus `q`.
pub fn propagate<S, F, const D: usize>(
    x: &S,
    p: &SMatrix<f64, D, D>,
    q: &SMatrix<f64, D, D>,
    weights: &SigmaWeights,
    mut f: F,
) -> Result<(S, SMatrix<f64, D, D>)>
where
    S: Manifold<D> + Clone,
    F: FnMut(&S) -> Result<S>,
{
    let points = sigma_points(x, p, weights)?;
    let center = f(&points.center)?;
    let mut spread = Vec::with_capacity(2 * D);
    for point in points.plus.iter().chain(points.minus.iter()) {
        spread.push(center.inverse_retract(&f(point)?)?);
    }
    let mean: SVector<f64, D> = spread.iter().sum::<SVector<f64, D>>() * weights.wj;
    let mut cov = mean * mean.transpose() * weights.w0;
    for xi in &spread {
        let d = xi - mean;
        cov.ger(weights.wj, &d, &d, 1.0);
    }
    Ok((center, symmetrize(&(cov + q))))
}

/// Result of a measurement update.
#[derive(Debug, Clone)]
pub struct UpdateOutcome<S, const D: usize, const M: usize> {
    pub state: S,
    pub covariance: SMatrix<f64, D, D>,
    /// Measurement minus the sigma-point predicted mean.
    pub innovation: SVector<f64, M>,
    pub innovation_covariance: SMatrix<f64, M, M>,
    /// Outlier threshold; infinite when gating is disabled.
    pub threshold: f64,
    pub accepted: bool,
}

/// Outlier threshold `multiplier * sqrt(|diag(P_yy)|)`.
pub fn innovation_threshold<const M: usize>(innovation_covariance: &SMatrix<f64, M, M>, multiplier: f64) -> f64 {
    multiplier * innovation_covariance.diagonal().norm().sqrt()
}

/// Whether any innovation component exceeds the threshold.
pub fn exceeds_threshold<const M: usize>(innovation: &SVector<f64, M>, threshold: f64) -> bool {
    innovation.iter().any(|v| v.abs() > threshold)
}

/// Unscented update with optional innovation gate. When the gate trips the
/// outcome carries an untouched copy of `(x, P)`.
pub fn update<S, H, const D: usize, const M: usize>(
    x: &S,
    p: &SMatrix<f64, D, D>,
    z: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
    weights: &SigmaWeights,
    gate_multiplier: Option<f64>,
    mut h: H,
) -> Result<UpdateOutcome<S, D, M>>
where
    S: Manifold<D> + Clone,
    H: FnMut(&S) -> Result<SVector<f64, M>>,
{
    let points = sigma_points(x, p, weights)?;
    let y0 = h(&points.center)?;
    let mut y_plus = Vec::with_capacity(D);
    let mut y_minus = Vec::with_capacity(D);
    for (a, b) in points.plus.iter().zip(points.minus.iter()) {
        y_plus.push(h(a)?);
        y_minus.push(h(b)?);
    }
    let y_sum: SVector<f64, M> = y_plus.iter().chain(y_minus.iter()).sum();
    let y_mean = y0 * weights.wm + y_sum * weights.wj;

    let d0 = y0 - y_mean;
    let mut pyy = d0 * d0.transpose() * weights.w0;
    let mut pxy = SMatrix::<f64, D, M>::zeros();
    for j in 0..D {
        let dp = y_plus[j] - y_mean;
        let dm = y_minus[j] - y_mean;
        pyy.ger(weights.wj, &dp, &dp, 1.0);
        pyy.ger(weights.wj, &dm, &dm, 1.0);
        pxy.ger(weights.wj, &points.offsets[j], &(dp - dm), 1.0);
    }
    let pyy = symmetrize(&(pyy + r));
    let innovation = z - y_mean;

    let threshold = gate_multiplier.map_or(f64::INFINITY, |m| innovation_threshold(&pyy, m));
    if exceeds_threshold(&innovation, threshold) {
        return Ok(UpdateOutcome {
            state: x.clone(),
            covariance: *p,
            innovation,
            innovation_covariance: pyy,
            threshold,
            accepted: false,
        });
    }

    let chol = pyy.cholesky().ok_or(NavError::SingularInnovation)?;
    let gain_t = chol.solve(&pxy.transpose());
    let gain = gain_t.transpose();
    let correction = gain * innovation;
    let state = x.retract(&correction)?;
    let covariance = symmetrize(&(p - gain * pyy * gain_t));
    Ok(UpdateOutcome {
        state,
        covariance,
        innovation,
        innovation_covariance: pyy,
        threshold,
        accepted: true,
    })
}
