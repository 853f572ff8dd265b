//! Physical and geodetic constants.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// GPS L1 carrier, Hz.
pub const GPS_L1_HZ: f64 = 1_575.42e6;

/// GPS L2 carrier, Hz.
pub const GPS_L2_HZ: f64 = 1_227.6e6;

/// GPS L1 C/A chip interval, s.
pub const GPS_CA_CHIP_S: f64 = 1.0 / 1.023e6;

/// WGS-84 semi-major axis, m.
pub const WGS84_A: f64 = 6_378_137.0;

/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Earth gravitational parameter (WGS-84), m^3/s^2.
pub const EARTH_MU: f64 = 3.986_004_418e14;

/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_0e-5;

/// Nominal GPS orbit radius, m.
pub const GPS_ORBIT_RADIUS: f64 = 26_560_000.0;
