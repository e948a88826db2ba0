//! Earth model for local-level (north-east-down) navigation.
//!
//! The reference ellipsoid is WGS-84. Gravity is Somigliana normal gravity with a
//! linear free-air correction; it only needs to be smooth and latitude-correct
//! for an AUV operating within a few hundred meters of the surface.
//!
//! Curvilinear positions are geodetic latitude and longitude in radians plus
//! altitude in meters (positive up). Cartesian distances are north-east-down
//! meters, which is why the third diagonal entry of both transforms is -1.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

/// North-east-down vector (meters, meters/second or radians/second by use).
pub type NedVector = Vector3<f64>;

/// WGS-84 semi-major axis, meters.
pub const SEMI_MAJOR_AXIS: f64 = 6_378_137.0;
/// WGS-84 first eccentricity squared.
pub const ECCENTRICITY_SQUARED: f64 = 6.694_379_990_14e-3;
/// Rotation rate of the earth about its axis, rad/s.
pub const EARTH_RATE: f64 = 7.292_115e-5;
/// Normal gravity at the equator, m/s^2.
pub const EQUATORIAL_GRAVITY: f64 = 9.780_325_335_9;
/// Somigliana constant k = (b g_p - a g_e) / (a g_e).
pub const SOMIGLIANA_K: f64 = 0.001_931_852_652_41;
/// Free-air gravity gradient, (m/s^2)/m.
pub const FREE_AIR_GRADIENT: f64 = 3.086e-6;

const SINGULAR_COS: f64 = 1e-12;

/// Reference ellipsoid and rotation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidParams {
    pub semi_major_axis: f64,
    pub eccentricity_squared: f64,
    pub earth_rate: f64,
    pub equatorial_gravity: f64,
    pub somigliana_k: f64,
    pub free_air_gradient: f64,
}

pub const WGS84: EllipsoidParams = EllipsoidParams {
    semi_major_axis: SEMI_MAJOR_AXIS,
    eccentricity_squared: ECCENTRICITY_SQUARED,
    earth_rate: EARTH_RATE,
    equatorial_gravity: EQUATORIAL_GRAVITY,
    somigliana_k: SOMIGLIANA_K,
    free_air_gradient: FREE_AIR_GRADIENT,
};

impl Default for EllipsoidParams {
    fn default() -> Self {
        WGS84
    }
}

/// Geodetic latitude, longitude (radians) and altitude (meters, up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvilinearPosition {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl CurvilinearPosition {
    /// Validated constructor; longitude is wrapped into (-pi, pi].
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        if !(latitude.is_finite() && longitude.is_finite() && altitude.is_finite()) {
            return Err(NavError::NonFinite("curvilinear position"));
        }
        check_latitude(latitude)?;
        Ok(Self {
            latitude,
            longitude: wrap_angle(longitude),
            altitude,
        })
    }

    pub fn from_degrees(latitude_deg: f64, longitude_deg: f64, altitude: f64) -> Result<Self> {
        Self::new(latitude_deg.to_radians(), longitude_deg.to_radians(), altitude)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.latitude, self.longitude, self.altitude)
    }

    /// `self + delta` with the longitude re-wrapped.
    pub fn offset(&self, delta: &Vector3<f64>) -> Self {
        Self {
            latitude: self.latitude + delta.x,
            longitude: wrap_angle(self.longitude + delta.y),
            altitude: self.altitude + delta.z,
        }
    }

    /// Curvilinear difference `self - other` with the longitude term wrapped.
    pub fn difference(&self, other: &Self) -> Vector3<f64> {
        Vector3::new(
            self.latitude - other.latitude,
            wrap_angle(self.longitude - other.longitude),
            self.altitude - other.altitude,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.latitude.is_finite() && self.longitude.is_finite() && self.altitude.is_finite()
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

fn check_latitude(latitude: f64) -> Result<()> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&latitude) {
        return Err(NavError::LatitudeOutOfRange(latitude));
    }
    Ok(())
}

impl EllipsoidParams {
    /// Meridian (R_N) and transverse (R_E) radii of curvature.
    pub fn principal_radii(&self, latitude: f64) -> Result<(f64, f64)> {
        check_latitude(latitude)?;
        let s = latitude.sin();
        let denom = 1.0 - self.eccentricity_squared * s * s;
        let transverse = self.semi_major_axis / denom.sqrt();
        let meridian = self.semi_major_axis * (1.0 - self.eccentricity_squared) / (denom * denom.sqrt());
        Ok((meridian, transverse))
    }

    /// Maps a north-east-down distance to a curvilinear difference.
    pub fn cart_to_curv_matrix(&self, position: &CurvilinearPosition) -> Result<Matrix3<f64>> {
        let (n, e, _) = self.curvilinear_scales(position)?;
        Ok(Matrix3::from_diagonal(&Vector3::new(1.0 / n, 1.0 / e, -1.0)))
    }

    /// Maps a curvilinear difference to north-east-down meters.
    pub fn curv_to_cart_matrix(&self, position: &CurvilinearPosition) -> Result<Matrix3<f64>> {
        let (n, e, _) = self.curvilinear_scales(position)?;
        Ok(Matrix3::from_diagonal(&Vector3::new(n, e, -1.0)))
    }

    /// Earth rotation rate resolved in the navigation frame.
    pub fn earth_rate_n(&self, latitude: f64) -> Result<NedVector> {
        check_latitude(latitude)?;
        Ok(Vector3::new(
            self.earth_rate * latitude.cos(),
            0.0,
            -self.earth_rate * latitude.sin(),
        ))
    }

    /// Rotation rate of the navigation frame relative to the earth.
    pub fn transport_rate_n(&self, velocity: &NedVector, position: &CurvilinearPosition) -> Result<NedVector> {
        let (meridian, transverse) = self.principal_radii(position.latitude)?;
        if position.latitude.cos().abs() < SINGULAR_COS {
            return Err(NavError::PolarSingularity(position.latitude));
        }
        let re_h = transverse + position.altitude;
        let rn_h = meridian + position.altitude;
        Ok(Vector3::new(
            velocity.y / re_h,
            -velocity.x / rn_h,
            -velocity.y * position.latitude.tan() / re_h,
        ))
    }

    /// Normal gravity in the navigation frame (down-only model).
    pub fn gravity_n(&self, position: &CurvilinearPosition) -> Result<NedVector> {
        check_latitude(position.latitude)?;
        Ok(Vector3::new(0.0, 0.0, self.gravity_magnitude(position.latitude, position.altitude)))
    }

    fn gravity_magnitude(&self, latitude: f64, altitude: f64) -> f64 {
        let s2 = latitude.sin().powi(2);
        let surface = self.equatorial_gravity * (1.0 + self.somigliana_k * s2)
            / (1.0 - self.eccentricity_squared * s2).sqrt();
        surface - self.free_air_gradient * altitude
    }

    /// (R_N + h, (R_E + h) cos L, R_E + h)
    fn curvilinear_scales(&self, position: &CurvilinearPosition) -> Result<(f64, f64, f64)> {
        let (meridian, transverse) = self.principal_radii(position.latitude)?;
        let c = position.latitude.cos();
        if c.abs() < SINGULAR_COS {
            return Err(NavError::PolarSingularity(position.latitude));
        }
        let rn_h = meridian + position.altitude;
        let re_h = transverse + position.altitude;
        if rn_h <= 0.0 || re_h <= 0.0 {
            return Err(NavError::InvalidConfig(format!(
                "altitude {} m is below the earth's center of curvature",
                position.altitude
            )));
        }
        Ok((rn_h, re_h * c, re_h))
    }
}

pub fn principal_radii(latitude: f64) -> Result<(f64, f64)> {
    WGS84.principal_radii(latitude)
}

pub fn cart_to_curv_matrix(position: &CurvilinearPosition) -> Result<Matrix3<f64>> {
    WGS84.cart_to_curv_matrix(position)
}

pub fn curv_to_cart_matrix(position: &CurvilinearPosition) -> Result<Matrix3<f64>> {
    WGS84.curv_to_cart_matrix(position)
}

pub fn earth_rate_n(latitude: f64) -> Result<NedVector> {
    WGS84.earth_rate_n(latitude)
}

pub fn transport_rate_n(velocity: &NedVector, position: &CurvilinearPosition) -> Result<NedVector> {
    WGS84.transport_rate_n(velocity, position)
}

pub fn gravity_n(position: &CurvilinearPosition) -> Result<NedVector> {
    WGS84.gravity_n(position)
}

/// Earth quantities evaluated once at a position, for inner loops that need
/// several of them (strapdown steps, retractions).
#[derive(Debug, Clone, Copy)]
pub struct LocalEarth {
    /// R_N + h
    pub meridian_h: f64,
    /// R_E + h
    pub transverse_h: f64,
    pub sin_lat: f64,
    pub cos_lat: f64,
    pub gravity: f64,
}

impl LocalEarth {
    pub fn at(position: &CurvilinearPosition) -> Result<Self> {
        let (meridian, transverse) = WGS84.principal_radii(position.latitude)?;
        let (sin_lat, cos_lat) = position.latitude.sin_cos();
        if cos_lat.abs() < SINGULAR_COS {
            return Err(NavError::PolarSingularity(position.latitude));
        }
        let meridian_h = meridian + position.altitude;
        let transverse_h = transverse + position.altitude;
        if meridian_h <= 0.0 || transverse_h <= 0.0 {
            return Err(NavError::InvalidConfig(format!(
                "altitude {} m is below the earth's center of curvature",
                position.altitude
            )));
        }
        Ok(Self {
            meridian_h,
            transverse_h,
            sin_lat,
            cos_lat,
            gravity: WGS84.gravity_magnitude(position.latitude, position.altitude),
        })
    }

    pub fn earth_rate(&self) -> NedVector {
        Vector3::new(EARTH_RATE * self.cos_lat, 0.0, -EARTH_RATE * self.sin_lat)
    }

    pub fn transport_rate(&self, velocity: &NedVector) -> NedVector {
        Vector3::new(
            velocity.y / self.transverse_h,
            -velocity.x / self.meridian_h,
            -velocity.y * self.sin_lat / (self.cos_lat * self.transverse_h),
        )
    }

    pub fn gravity_vector(&self) -> NedVector {
        Vector3::new(0.0, 0.0, self.gravity)
    }

    /// Diagonal of the NED-meters to curvilinear map.
    pub fn cart_to_curv(&self) -> Vector3<f64> {
        Vector3::new(1.0 / self.meridian_h, 1.0 / (self.transverse_h * self.cos_lat), -1.0)
    }

    /// Diagonal of the curvilinear to NED-meters map.
    pub fn curv_to_cart(&self) -> Vector3<f64> {
        Vector3::new(self.meridian_h, self.transverse_h * self.cos_lat, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at(lat: f64, h: f64) -> CurvilinearPosition {
        CurvilinearPosition::new(lat, 0.3, h).unwrap()
    }

    #[test]
    fn radii_at_equator() {
        let (rn, re) = principal_radii(0.0).unwrap();
        assert_eq!(re, 6_378_137.0);
        // a (1 - e^2), evaluated by hand
        assert!((rn - 6_335_439.327).abs() < 0.01, "{rn}");
    }

    #[test]
    fn radii_at_pole_are_equal() {
        let (rn, re) = principal_radii(FRAC_PI_2).unwrap();
        let expected = SEMI_MAJOR_AXIS / (1.0 - ECCENTRICITY_SQUARED).sqrt();
        assert_relative_eq!(rn, expected, max_relative = 1e-14);
        assert_relative_eq!(re, expected, max_relative = 1e-14);
    }

    #[test]
    fn latitude_out_of_range_is_rejected() {
        assert!(matches!(principal_radii(1.6), Err(NavError::LatitudeOutOfRange(_))));
        assert!(CurvilinearPosition::new(-2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn transform_entries() {
        let p = at(0.0, 0.0);
        let m = cart_to_curv_matrix(&p).unwrap();
        assert_relative_eq!(m[(1, 1)], 1.0 / 6_378_137.0, max_relative = 1e-15);
        assert_eq!(m[(2, 2)], -1.0);
        let inv = curv_to_cart_matrix(&p).unwrap();
        assert!((inv[(0, 0)] - 6_335_439.327).abs() < 0.01);
        let up = curv_to_cart_matrix(&at(0.0, 100.0)).unwrap();
        assert_relative_eq!(up[(0, 0)] - inv[(0, 0)], 100.0, epsilon = 1e-8);
        let prod = m * inv;
        assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn polar_transform_is_singular() {
        let p = CurvilinearPosition { latitude: FRAC_PI_2, longitude: 0.0, altitude: 0.0 };
        assert!(matches!(cart_to_curv_matrix(&p), Err(NavError::PolarSingularity(_))));
        assert!(transport_rate_n(&Vector3::zeros(), &p).is_err());
    }

    #[test]
    fn earth_rate_examples() {
        assert_eq!(earth_rate_n(0.0).unwrap(), Vector3::new(7.292115e-5, 0.0, 0.0));
        let pole = earth_rate_n(FRAC_PI_2).unwrap();
        assert!(pole.x.abs() < 1e-20);
        assert_relative_eq!(pole.z, -7.292115e-5, max_relative = 1e-15);
    }

    #[test]
    fn transport_rate_examples() {
        let p = at(0.0, 0.0);
        assert_eq!(transport_rate_n(&Vector3::zeros(), &p).unwrap(), Vector3::zeros());
        let east = transport_rate_n(&Vector3::new(0.0, 1.0, 0.0), &p).unwrap();
        assert_relative_eq!(east.x, 1.0 / 6_378_137.0, max_relative = 1e-15);
        assert_eq!(east.y, 0.0);
        assert!(east.z.abs() < 1e-20);
        let north = transport_rate_n(&Vector3::new(1.0, 0.0, 0.0), &p).unwrap();
        assert!((north.y + 1.0 / 6_335_439.327).abs() < 1e-12);
        assert_eq!(north.x, 0.0);
    }

    #[test]
    fn gravity_examples() {
        let eq = gravity_n(&at(0.0, 0.0)).unwrap();
        assert!((eq.z - 9.7803).abs() < 0.001);
        assert_eq!(eq.x, 0.0);
        let pole = WGS84.gravity_magnitude(FRAC_PI_2, 0.0);
        assert!((pole - 9.8322).abs() < 0.001, "{pole}");
        let high = gravity_n(&at(0.4, 1000.0)).unwrap();
        let low = gravity_n(&at(0.4, 0.0)).unwrap();
        assert!(high.z < low.z);
        assert!((9.76..=9.84).contains(&high.z));
    }

    #[test]
    fn local_earth_matches_free_functions() {
        let p = at(0.6, -12.0);
        let local = LocalEarth::at(&p).unwrap();
        let v = Vector3::new(1.2, -0.7, 0.1);
        assert_relative_eq!(local.transport_rate(&v), transport_rate_n(&v, &p).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(local.earth_rate(), earth_rate_n(p.latitude).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(local.gravity_vector(), gravity_n(&p).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(
            Matrix3::from_diagonal(&local.cart_to_curv()),
            cart_to_curv_matrix(&p).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-0.25), -0.25);
    }
}
