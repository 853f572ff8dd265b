//! Synthetic observables for exercising the survey pipeline.
//!
//! A circular LEO receiver with an anti-velocity antenna tracks a Walker-style
//! GNSS constellation. Range-compensated CINR is drawn from a per-SV, per-band
//! level with a mild off-boresight slope and Gaussian scatter, then converted
//! back to raw CINR with the free-space path loss. Emitters depress CINR when
//! they fall inside the receiver antenna's exposure cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Band, ObservableRecord, Region};
use crate::consts::{EARTH_MU, EARTH_ROTATION_RATE, GPS_ORBIT_RADIUS, WGS84_A};
use crate::error::{Error, Result};
use crate::geodesy::{
    ecef_to_geodetic, free_space_path_loss_db, geodetic_to_ecef, look_angles, viewing_geometry,
};
use crate::orbits::OrbitSpec;
use crate::{Ecef, Geodetic};

/// Walker-style constellation of circular orbits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub planes: u32,
    pub per_plane: u32,
    /// m.
    pub radius: f64,
    /// Degrees.
    pub inclination: f64,
}

impl Default for Constellation {
    fn default() -> Self {
        Self {
            planes: 6,
            per_plane: 4,
            radius: GPS_ORBIT_RADIUS,
            inclination: 55.0,
        }
    }
}

impl Constellation {
    pub fn len(&self) -> u32 {
        self.planes * self.per_plane
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ECEF position of satellite `sv_id` (1-based) at time `t`.
    pub fn position(&self, sv_id: u32, t: f64) -> Ecef {
        let k = sv_id - 1;
        let (plane, slot) = (k / self.per_plane, k % self.per_plane);
        let raan = 360.0 / self.planes as f64 * plane as f64;
        let phase = 360.0 / self.per_plane as f64 * slot as f64 + 15.0 * plane as f64;
        let n = (EARTH_MU / self.radius.powi(3)).sqrt();
        let u = phase.to_radians() + n * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = raan.to_radians().sin_cos();
        let (si, ci) = self.inclination.to_radians().sin_cos();
        let p = Ecef::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si) * self.radius;
        p.rotate_z(-EARTH_ROTATION_RATE * t)
    }
}

/// Interference-free range-compensated CINR model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyModel {
    /// Range-compensated L1 level of SV 1 at boresight, dB-Hz.
    pub base_level: f64,
    /// Spread of per-SV levels, dB.
    pub sv_spread: f64,
    /// L2 minus L1 level, dB.
    pub l2_offset: f64,
    /// dB per degree of receiver off-boresight angle.
    pub zr_slope: f64,
    /// Gaussian scatter, dB.
    pub sigma: f64,
}

impl Default for SkyModel {
    fn default() -> Self {
        Self {
            base_level: 225.0,
            sv_spread: 2.0,
            l2_offset: -3.0,
            zr_slope: -0.2,
            sigma: 0.5,
        }
    }
}

impl SkyModel {
    /// Expected range-compensated CINR, dB-Hz.
    pub fn mean(&self, sv_id: u32, band: Band, z_r: f64) -> f64 {
        // deterministic per-SV offset spread over [-spread, spread]
        let offset = self.sv_spread * ((sv_id as f64 * 2.399_963).sin());
        let band_offset = match band {
            Band::L1 => 0.0,
            Band::L2 => self.l2_offset,
        };
        self.base_level + offset + band_offset + self.zr_slope * z_r
    }

    /// One record with random scatter; `depression` (dB) is subtracted.
    #[allow(clippy::too_many_arguments)]
    pub fn record<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        t: f64,
        sv_id: u32,
        band: Band,
        r_sr: f64,
        z_r: f64,
        z_s: f64,
        ground: (f64, f64),
        region: Region,
        depression: f64,
    ) -> Result<ObservableRecord> {
        let z: f64 = StandardNormal.sample(rng);
        let compensated = self.mean(sv_id, band, z_r) + self.sigma * z;
        Ok(ObservableRecord {
            t,
            sv_id,
            band,
            cinr: compensated - free_space_path_loss_db(r_sr, band.frequency())? - depression,
            r_sr,
            z_r,
            z_s,
            ground_lat: ground.0,
            ground_lon: ground.1,
            region,
        })
    }
}

/// Latitude/longitude box, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

/// Ground emitter that depresses CINR when inside the receiver's exposure cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub position: Geodetic,
    /// dB.
    pub depression: f64,
    pub bands: Vec<Band>,
    /// Half-angle around the receiver boresight within which the emitter
    /// couples into the antenna, degrees.
    pub exposure_half_angle: f64,
}

impl Emitter {
    pub fn new(position: Geodetic, depression: f64) -> Self {
        Self {
            position,
            depression,
            bands: Band::ALL.to_vec(),
            exposure_half_angle: 35.0,
        }
    }

    /// Whether a receiver at `rx` with unit `boresight` is exposed.
    pub fn exposes(&self, rx: &Ecef, boresight: &Ecef) -> bool {
        let (_, el, _) = look_angles(&self.position, rx);
        if el < 0.0 {
            return false;
        }
        let to_emitter = geodetic_to_ecef(&self.position) - *rx;
        boresight.angle_to(&to_emitter).to_degrees() <= self.exposure_half_angle
    }
}

/// Orbit, sky and ground truth for a synthetic survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyScenario {
    pub orbit: OrbitSpec,
    pub constellation: Constellation,
    pub sky: SkyModel,
    pub emitters: Vec<Emitter>,
    /// Sub-receiver points inside any box are tagged as ocean control.
    pub control_boxes: Vec<GeoBox>,
    /// s.
    pub start: f64,
    /// s.
    pub duration: f64,
    /// Record interval, s.
    pub step: f64,
    /// Largest receiver off-boresight angle emitted, degrees.
    pub z_r_limit: f64,
    pub seed: u64,
}

impl Default for SurveyScenario {
    fn default() -> Self {
        Self {
            orbit: OrbitSpec::default(),
            constellation: Constellation::default(),
            sky: SkyModel::default(),
            emitters: Vec::new(),
            control_boxes: default_control_boxes(),
            start: 0.0,
            duration: 86_400.0,
            step: 1.0,
            z_r_limit: 20.0,
            seed: 0,
        }
    }
}

/// Open-ocean stand-ins: central Pacific, South Atlantic, southern Indian Ocean.
pub fn default_control_boxes() -> Vec<GeoBox> {
    vec![
        GeoBox {
            lat_min: -50.0,
            lat_max: 50.0,
            lon_min: -180.0,
            lon_max: -125.0,
        },
        GeoBox {
            lat_min: -50.0,
            lat_max: -5.0,
            lon_min: -30.0,
            lon_max: 5.0,
        },
        GeoBox {
            lat_min: -50.0,
            lat_max: -10.0,
            lon_min: 60.0,
            lon_max: 100.0,
        },
    ]
}

/// Minimum altitude of a line of sight for it to count as unobstructed, m.
const GRAZING_HEIGHT: f64 = 50_000.0;

fn clears_earth(a: &Ecef, b: &Ecef) -> bool {
    let d = *b - *a;
    let s = (-a.dot(&d) / d.dot(&d)).clamp(0.0, 1.0);
    (*a + d * s).norm() > WGS84_A + GRAZING_HEIGHT
}

impl SurveyScenario {
    pub fn validate(&self) -> Result<()> {
        self.orbit.validate()?;
        if !(self.step > 0.0 && self.duration >= 0.0 && self.z_r_limit > 0.0) {
            return Err(Error::invalid("survey step, duration and z_r limit must be positive"));
        }
        if self.constellation.is_empty() || !(self.constellation.radius > self.orbit.radius()) {
            return Err(Error::invalid("constellation must be non-empty and above the receiver"));
        }
        if !(self.sky.sigma >= 0.0) {
            return Err(Error::invalid("sky scatter must be non-negative"));
        }
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        (self.duration / self.step + 1e-9).floor() as usize + 1
    }

    /// Time-ordered records, generated lazily and deterministically.
    pub fn records(&self) -> Result<impl Iterator<Item = Result<ObservableRecord>> + '_> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.epochs()).flat_map(move |k| {
            let t = self.start + k as f64 * self.step;
            match self.epoch(t, &mut rng) {
                Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
                Err(e) => vec![Err(e)],
            }
        }))
    }

    /// Collects every record.
    pub fn generate(&self) -> Result<Vec<ObservableRecord>> {
        self.records()?.collect()
    }

    fn epoch<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<Vec<ObservableRecord>> {
        let (rx, v) = self.orbit.ecef_state(t);
        let boresight = -v.unit();
        let sub = ecef_to_geodetic(&rx)?;
        let ground = (sub.latitude, sub.longitude);
        let region = if self.control_boxes.iter().any(|b| b.contains(ground.0, ground.1)) {
            Region::OceanControl
        } else {
            Region::Survey
        };
        let exposed: Vec<&Emitter> = if region == Region::Survey {
            self.emitters.iter().filter(|e| e.exposes(&rx, &boresight)).collect()
        } else {
            Vec::new()
        };
        let mut out = Vec::new();
        for sv in 1..=self.constellation.len() {
            let sat = self.constellation.position(sv, t);
            let geom = viewing_geometry(&rx, &boresight, &sat)?;
            if geom.z_r > self.z_r_limit || !clears_earth(&rx, &sat) {
                continue;
            }
            for band in Band::ALL {
                let depression: f64 = exposed
                    .iter()
                    .filter(|e| e.bands.contains(&band))
                    .map(|e| e.depression)
                    .sum();
                out.push(self.sky.record(
                    rng, t, sv, band, geom.r_sr, geom.z_r, geom.z_s, ground, region, depression,
                )?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::range_compensate;

    #[test]
    fn constellation_on_its_orbit() {
        let c = Constellation::default();
        assert_eq!(c.len(), 24);
        for sv in 1..=24 {
            let p = c.position(sv, 1234.0);
            assert!((p.norm() - GPS_ORBIT_RADIUS).abs() < 1e-6 * GPS_ORBIT_RADIUS);
        }
    }

    #[test]
    fn compensated_levels_are_flat_without_scatter() {
        let scenario = SurveyScenario {
            sky: SkyModel {
                sigma: 0.0,
                zr_slope: 0.0,
                ..Default::default()
            },
            duration: 3_000.0,
            control_boxes: Vec::new(),
            ..Default::default()
        };
        let recs = scenario.generate().unwrap();
        assert!(!recs.is_empty());
        for r in &recs {
            let expected = scenario.sky.mean(r.sv_id, r.band, r.z_r);
            assert!((range_compensate(r).unwrap() - expected).abs() < 0.01);
        }
        let mut ranges: Vec<f64> = recs.iter().map(|r| r.r_sr).collect();
        ranges.sort_by(f64::total_cmp);
        assert!(ranges.last().unwrap() - ranges[0] > 1e6, "raw CINR should vary with range");
    }

    #[test]
    fn deterministic_and_within_limits() {
        let scenario = SurveyScenario {
            duration: 2_000.0,
            seed: 3,
            ..Default::default()
        };
        let a = scenario.generate().unwrap();
        assert_eq!(a, scenario.generate().unwrap());
        assert!(a.iter().all(|r| r.z_r <= 20.0));
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
    }
}
