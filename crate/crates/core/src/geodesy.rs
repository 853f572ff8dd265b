//! WGS-84 frames, free-space path loss and antenna viewing geometry.
//!
//! Angles cross the public interface in degrees and are converted to
//! radians internally.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::consts::{SPEED_OF_LIGHT, WGS84_A, WGS84_F};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Geodetic position on the WGS-84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition<T> {
    /// Degrees, [-90, 90].
    pub latitude: T,
    /// Degrees, [-180, 180).
    pub longitude: T,
    /// Meters above the ellipsoid.
    pub altitude: T,
}

impl<T: Real> GeodeticPosition<T> {
    /// Validates ranges and wraps the longitude into [-180, 180).
    pub fn new(latitude: T, longitude: T, altitude: T) -> Result<Self> {
        let ninety = T::lit(90.0);
        if !latitude.is_finite() || latitude.abs() > ninety {
            return Err(Error::invalid(format!("latitude {latitude} outside [-90, 90]")));
        }
        if !longitude.is_finite() || !altitude.is_finite() {
            return Err(Error::invalid("longitude and altitude must be finite"));
        }
        Ok(Self {
            latitude,
            longitude: wrap_longitude(longitude),
            altitude,
        })
    }

    pub fn latitude_rad(&self) -> T {
        self.latitude.to_radians()
    }

    pub fn longitude_rad(&self) -> T {
        self.longitude.to_radians()
    }
}

/// Wraps a longitude in degrees into [-180, 180).
pub fn wrap_longitude<T: Real>(lon: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut x = (lon + half) % full;
    if x < T::zero() {
        x = x + full;
    }
    x - half
}

/// Cartesian vector in the Earth-centered Earth-fixed frame (m or m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> EcefVector<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; zero vectors are returned unchanged.
    pub fn unit(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            *self / n
        } else {
            *self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle to another vector in radians, clamped against rounding.
    pub fn angle_to(&self, other: &Self) -> T {
        // atan2 form stays accurate near 0 and pi
        let c = self.cross(other).norm();
        let d = self.dot(other);
        c.atan2(d)
    }

    /// Rotation about the z axis by `angle` radians (right-handed).
    pub fn rotate_z(&self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Add for EcefVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for EcefVector<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for EcefVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for EcefVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for EcefVector<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl<T: Real> Div<T> for EcefVector<T> {
    type Output = Self;
    fn div(self, k: T) -> Self {
        Self::new(self.x / k, self.y / k, self.z / k)
    }
}

/// Off-boresight angles and range between a receiver and a GNSS satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewingGeometry<T> {
    /// Receiver antenna off-boresight angle, degrees.
    pub z_r: T,
    /// Satellite antenna off-boresight angle (from nadir), degrees.
    pub z_s: T,
    /// Satellite-to-receiver range, m.
    pub r_sr: T,
}

fn eccentricity_sq<T: Real>() -> T {
    let f = T::lit(WGS84_F);
    f * (T::lit(2.0) - f)
}

/// Forward WGS-84 transform.
pub fn geodetic_to_ecef<T: Real>(p: &GeodeticPosition<T>) -> EcefVector<T> {
    let a = T::lit(WGS84_A);
    let e2 = eccentricity_sq::<T>();
    let (sin_lat, cos_lat) = p.latitude_rad().sin_cos();
    let (sin_lon, cos_lon) = p.longitude_rad().sin_cos();
    let n = a / (T::one() - e2 * sin_lat * sin_lat).sqrt();
    EcefVector::new(
        (n + p.altitude) * cos_lat * cos_lon,
        (n + p.altitude) * cos_lat * sin_lon,
        (n * (T::one() - e2) + p.altitude) * sin_lat,
    )
}

/// Inverse WGS-84 transform by fixed-point iteration on latitude.
///
/// Rejects points within 6200 km of the geocenter, where the iteration is
/// not needed for any use in this crate and the problem is ill-conditioned.
pub fn ecef_to_geodetic<T: Real>(v: &EcefVector<T>) -> Result<GeodeticPosition<T>> {
    let r = v.norm();
    if !v.is_finite() || r < T::lit(6.2e6) {
        return Err(Error::NearGeocenter { radius_m: r.as_f64() });
    }
    let a = T::lit(WGS84_A);
    let e2 = eccentricity_sq::<T>();
    let p = v.x.hypot(v.y);
    let lon = v.y.atan2(v.x);

    let mut lat = v.z.atan2(p * (T::one() - e2));
    let tol = T::lit(1e-14).max(T::epsilon());
    for _ in 0..30 {
        let s = lat.sin();
        let n = a / (T::one() - e2 * s * s).sqrt();
        let next = (v.z + e2 * n * s).atan2(p);
        let done = (next - lat).abs() <= tol;
        lat = next;
        if done {
            break;
        }
    }
    let (s, c) = lat.sin_cos();
    let h = p * c + v.z * s - a * (T::one() - e2 * s * s).sqrt();
    Ok(GeodeticPosition {
        latitude: lat.to_degrees(),
        longitude: wrap_longitude(lon.to_degrees()),
        altitude: h,
    })
}

/// Local east, north and up unit vectors at a geodetic point.
pub fn enu_basis<T: Real>(p: &GeodeticPosition<T>) -> [EcefVector<T>; 3] {
    let (sl, cl) = p.latitude_rad().sin_cos();
    let (so, co) = p.longitude_rad().sin_cos();
    [
        EcefVector::new(-so, co, T::zero()),
        EcefVector::new(-sl * co, -sl * so, cl),
        EcefVector::new(cl * co, cl * so, sl),
    ]
}

/// Azimuth (degrees east of north), elevation (degrees) and range (m) of
/// `target` as seen from `observer`.
pub fn look_angles<T: Real>(observer: &GeodeticPosition<T>, target: &EcefVector<T>) -> (T, T, T) {
    let [e, n, u] = enu_basis(observer);
    let d = *target - geodetic_to_ecef(observer);
    let range = d.norm();
    let (de, dn, du) = (d.dot(&e), d.dot(&n), d.dot(&u));
    let mut az = de.atan2(dn).to_degrees();
    if az < T::zero() {
        az = az + T::lit(360.0);
    }
    let el = du.atan2(de.hypot(dn)).to_degrees();
    (az, el, range)
}

/// Free-space path loss 20 log10(4 pi r f / c) in dB.
pub fn free_space_path_loss_db<T: Real>(range_m: T, freq_hz: T) -> Result<T> {
    if !(range_m > T::zero() && freq_hz > T::zero()) {
        return Err(Error::invalid("path loss needs positive range and frequency"));
    }
    let four_pi = T::lit(4.0) * T::PI();
    Ok(T::lit(20.0) * (four_pi * range_m * freq_hz / T::lit(SPEED_OF_LIGHT)).log10())
}

/// Mean Earth radius used for great-circle offsets, m.
pub const MEAN_EARTH_RADIUS: f64 = 6_371_000.0;

/// Point reached from (`lat`, `lon`) by travelling `distance` meters along a
/// great circle with initial `bearing` (degrees east of north) on a sphere of
/// radius [`MEAN_EARTH_RADIUS`]. Returns (latitude, longitude) in degrees.
pub fn spherical_destination(lat: f64, lon: f64, bearing: f64, distance: f64) -> (f64, f64) {
    let d = distance / MEAN_EARTH_RADIUS;
    let (lat1, lon1, brg) = (lat.to_radians(), lon.to_radians(), bearing.to_radians());
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * brg.cos()).asin();
    let lon2 = lon1 + (brg.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    (lat2.to_degrees(), wrap_longitude(lon2.to_degrees()))
}

/// Geocentric latitude (degrees) of a point on the ellipsoid surface at the
/// given geodetic latitude.
pub fn geocentric_latitude(geodetic_lat: f64) -> f64 {
    ((1.0 - WGS84_F).powi(2) * geodetic_lat.to_radians().tan()).atan().to_degrees()
}

/// Off-boresight angles for a receiver with the given boresight unit vector
/// and a nadir-pointing GNSS satellite.
pub fn viewing_geometry<T: Real>(
    receiver: &EcefVector<T>,
    receiver_boresight: &EcefVector<T>,
    satellite: &EcefVector<T>,
) -> Result<ViewingGeometry<T>> {
    let los = *satellite - *receiver;
    let r_sr = los.norm();
    if !(r_sr > T::zero()) {
        return Err(Error::invalid("receiver and satellite coincide"));
    }
    if !(receiver.norm() < satellite.norm()) {
        return Err(Error::invalid("receiver must lie below the satellite orbit radius"));
    }
    let z_r = receiver_boresight.angle_to(&los).to_degrees();
    let z_s = (-*satellite).angle_to(&(-los)).to_degrees();
    Ok(ViewingGeometry { z_r, z_s, r_sr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geo(lat: f64, lon: f64, alt: f64) -> GeodeticPosition<f64> {
        GeodeticPosition::new(lat, lon, alt).unwrap()
    }

    #[test]
    fn equator_and_pole() {
        let v = geodetic_to_ecef(&geo(0.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.x, 6_378_137.0, epsilon = 1e-6);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-6);

        let v = geodetic_to_ecef(&geo(90.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(v.z, 6_356_752.314, epsilon = 1e-3);

        let g = ecef_to_geodetic(&EcefVector::new(6_378_137.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(g.latitude, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.longitude, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.altitude, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn syria_site_round_trip() {
        let p = geo(35.4, 35.95, 48.0);
        let v = geodetic_to_ecef(&p);
        // Frozen from the closed-form forward transform.
        assert_abs_diff_eq!(v.x, 4_213_508.831, epsilon = 1e-2);
        assert_abs_diff_eq!(v.y, 3_055_678.990, epsilon = 1e-2);
        assert_abs_diff_eq!(v.z, 3_674_157.649, epsilon = 1e-2);
        let back = ecef_to_geodetic(&v).unwrap();
        assert_abs_diff_eq!(back.latitude, 35.4, epsilon = 1e-9);
        assert_abs_diff_eq!(back.longitude, 35.95, epsilon = 1e-9);
        assert_abs_diff_eq!(back.altitude, 48.0, epsilon = 1e-3);
    }

    #[test]
    fn rejects_geocenter_and_bad_latitude() {
        assert!(matches!(
            ecef_to_geodetic(&EcefVector::new(1.0e3, 0.0, 0.0)),
            Err(Error::NearGeocenter { .. })
        ));
        assert!(GeodeticPosition::new(91.0, 0.0, 0.0).is_err());
        assert!(GeodeticPosition::new(0.0, f64::NAN, 0.0).is_err());
        assert_eq!(geo(0.0, 180.0, 0.0).longitude, -180.0);
    }

    #[test]
    fn path_loss_values() {
        let l = free_space_path_loss_db(1_340_000.0, 1575.42e6).unwrap();
        assert_abs_diff_eq!(l, 159.0, epsilon = 0.1);
        let unit = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * 1575.42e6);
        assert_abs_diff_eq!(free_space_path_loss_db(unit, 1575.42e6).unwrap(), 0.0, epsilon = 1e-12);
        let l2 = free_space_path_loss_db(2_680_000.0, 1575.42e6).unwrap();
        assert_abs_diff_eq!(l2, 164.958, epsilon = 0.001);
        assert_abs_diff_eq!(l2 - l, 20.0 * 2f64.log10(), epsilon = 1e-10);
        assert!(free_space_path_loss_db(0.0, 1.0).is_err());
        assert!(free_space_path_loss_db(1.0, -1.0).is_err());
        // single precision works through the same code path
        let lf: f32 = free_space_path_loss_db(1_340_000.0f32, 1575.42e6f32).unwrap();
        assert!((lf - 159.0).abs() < 0.1);
    }

    #[test]
    fn horizontal_line_of_sight_matches_law_of_sines() {
        let r_leo: f64 = 6_778_000.0;
        let r_gps: f64 = 26_560_000.0;
        let rx = EcefVector::new(r_leo, 0.0, 0.0);
        let boresight = EcefVector::new(0.0, -1.0, 0.0);
        let s = (r_gps * r_gps - r_leo * r_leo).sqrt();
        let sat = rx + boresight * s;
        let g = viewing_geometry(&rx, &boresight, &sat).unwrap();
        assert_abs_diff_eq!(g.z_r, 0.0, epsilon = 1e-9);
        let oracle = (r_leo / r_gps).asin().to_degrees();
        assert_abs_diff_eq!(g.z_s, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(g.z_s, 14.8, epsilon = 0.05);
        assert_abs_diff_eq!(g.r_sr, s, epsilon = 1e-6);
    }

    #[test]
    fn look_angles_overhead() {
        let obs = geo(10.0, 20.0, 0.0);
        let above = geodetic_to_ecef(&geo(10.0, 20.0, 400e3));
        let (_, el, range) = look_angles(&obs, &above);
        assert_abs_diff_eq!(el, 90.0, epsilon = 1e-6);
        assert_abs_diff_eq!(range, 400e3, epsilon = 1e-6);
    }
}
