//! Single-satellite Doppler geolocation of terrestrial emitters, oscillator
//! stability budgeting, and a CINR-based interference survey pipeline.
//!
//! The pure-math modules ([`geodesy`], [`linkbudget`], parts of [`clocks`]
//! and [`survey`]) are generic over the scalar type through [`Real`]. The
//! estimator, trajectory and Monte Carlo code runs in `f64`: ECEF
//! coordinates and fractional clock rates near 1e-11 are beyond `f32`.
// `!(x > 0.0)` style guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clocks;
pub mod consts;
pub mod error;
pub mod geodesy;
pub mod geolocate;
pub mod linkbudget;
pub mod montecarlo;
pub mod orbits;
pub mod scalar;
pub mod survey;

pub use error::{Error, Result};
pub use scalar::Real;

/// Geodetic position in double precision.
pub type Geodetic = geodesy::GeodeticPosition<f64>;
/// ECEF vector in double precision.
pub type Ecef = geodesy::EcefVector<f64>;
/// Viewing geometry in double precision.
pub type Viewing = geodesy::ViewingGeometry<f64>;
/// Clock frequency series in double precision.
pub type Series = clocks::FrequencySeries<f64>;
/// Quantizer description in double precision.
pub type Quantization = survey::QuantizationSpec<f64>;
