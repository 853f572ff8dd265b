//! Synthetic LEO receiver trajectories and trajectory file I/O.
//!
//! Trajectories are two-body circular orbits expressed in an inertial frame
//! that coincides with ECEF at mission time zero, then rotated into ECEF with
//! a uniform Earth rotation about the z axis.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consts::{EARTH_MU, EARTH_ROTATION_RATE, WGS84_A};
use crate::error::{Error, Result};
use crate::geodesy::{enu_basis, look_angles, EcefVector, GeodeticPosition};

type Vec3 = EcefVector<f64>;

/// Circular orbit description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    /// Altitude above the WGS-84 equatorial radius, m.
    pub altitude: f64,
    /// Degrees.
    pub inclination: f64,
    /// Right ascension of the ascending node in the epoch-zero inertial frame, degrees.
    pub raan: f64,
    /// Argument of latitude at `epoch`, degrees.
    pub arg_latitude: f64,
    /// Mission time at which `arg_latitude` applies, s.
    pub epoch: f64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        Self {
            altitude: 408_000.0,
            inclination: 51.6,
            raan: 0.0,
            arg_latitude: 0.0,
            epoch: 0.0,
        }
    }
}

impl OrbitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude > 200e3 && self.altitude < 2000e3) {
            return Err(Error::invalid(format!(
                "orbit altitude {} m outside (200 km, 2000 km)",
                self.altitude
            )));
        }
        if !(0.0..=180.0).contains(&self.inclination) {
            return Err(Error::invalid("inclination outside [0, 180] degrees"));
        }
        if !(self.raan.is_finite() && self.arg_latitude.is_finite() && self.epoch.is_finite()) {
            return Err(Error::invalid("orbit angles and epoch must be finite"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        WGS84_A + self.altitude
    }

    /// Inertial circular speed sqrt(mu / r).
    pub fn inertial_speed(&self) -> f64 {
        (EARTH_MU / self.radius()).sqrt()
    }

    pub fn mean_motion(&self) -> f64 {
        self.inertial_speed() / self.radius()
    }

    /// Orbit whose sub-satellite point passes over the given geocentric
    /// latitude/longitude at mission time `t`, on the ascending or descending
    /// half of the track.
    pub fn overflying(
        altitude: f64,
        inclination: f64,
        latitude: f64,
        longitude: f64,
        ascending: bool,
        t: f64,
    ) -> Result<Self> {
        let inc = inclination.to_radians();
        let lat = latitude.to_radians();
        let s = lat.sin() / inc.sin();
        if !(-1.0..=1.0).contains(&s) || inc.sin() == 0.0 {
            return Err(Error::invalid(format!(
                "latitude {latitude} unreachable at inclination {inclination}"
            )));
        }
        let mut u = s.asin();
        if !ascending {
            u = PI - u;
        }
        let node_offset = (inc.cos() * u.sin()).atan2(u.cos());
        let raan = longitude.to_radians() + EARTH_ROTATION_RATE * t - node_offset;
        let spec = Self {
            altitude,
            inclination,
            raan: raan.to_degrees().rem_euclid(360.0),
            arg_latitude: u.to_degrees(),
            epoch: t,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Inertial position and velocity at mission time `t`.
    pub fn inertial_state(&self, t: f64) -> (Vec3, Vec3) {
        let r = self.radius();
        let n = self.mean_motion();
        let u = self.arg_latitude.to_radians() + n * (t - self.epoch);
        let (su, cu) = u.sin_cos();
        let (so, co) = self.raan.to_radians().sin_cos();
        let (si, ci) = self.inclination.to_radians().sin_cos();
        let p = Vec3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si);
        let q = Vec3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si);
        (p * r, q * (r * n))
    }

    /// ECEF position and ECEF-relative velocity at mission time `t`.
    pub fn ecef_state(&self, t: f64) -> (Vec3, Vec3) {
        let (ri, vi) = self.inertial_state(t);
        let omega = Vec3::new(0.0, 0.0, EARTH_ROTATION_RATE);
        let theta = EARTH_ROTATION_RATE * t;
        let v_rel = vi - omega.cross(&ri);
        (ri.rotate_z(-theta), v_rel.rotate_z(-theta))
    }
}

/// Receiver kinematics and clock at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverState {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Receiver clock frequency error, s/s.
    pub clock_rate: f64,
}

/// Uniformly sampled receiver states from one capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub label: String,
    states: Vec<ReceiverState>,
}

const SPACING_TOL: f64 = 1e-9;

impl Pass {
    /// Builds a pass, checking for strictly increasing, uniformly spaced epochs.
    pub fn new(label: impl Into<String>, states: Vec<ReceiverState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("a pass needs at least one state"));
        }
        check_uniform(states.iter().map(|s| s.t))?;
        Ok(Self {
            label: label.into(),
            states,
        })
    }

    pub fn states(&self) -> &[ReceiverState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sampling interval, or zero for a single-state pass.
    pub fn dt(&self) -> f64 {
        match self.states.len() {
            0 | 1 => 0.0,
            n => (self.states[n - 1].t - self.states[0].t) / (n - 1) as f64,
        }
    }

    pub fn with_clock_rate(mut self, clock_rate: f64) -> Self {
        for s in &mut self.states {
            s.clock_rate = clock_rate;
        }
        self
    }

    /// Straight-line ECEF distance between the first and last states.
    pub fn displacement(&self) -> f64 {
        let first = self.states[0].position;
        let last = self.states[self.states.len() - 1].position;
        (last - first).norm()
    }

    /// Ground-track azimuth (degrees east of north) at the middle state.
    pub fn ground_track_azimuth(&self) -> Result<f64> {
        let mid = &self.states[self.states.len() / 2];
        let sub = crate::geodesy::ecef_to_geodetic(&mid.position)?;
        let [e, n, _] = enu_basis(&sub);
        Ok(mid.velocity.dot(&e).atan2(mid.velocity.dot(&n)).to_degrees().rem_euclid(360.0))
    }

    /// Elevation (degrees) of each receiver state as seen from `target`.
    pub fn elevations_from(&self, target: &GeodeticPosition<f64>) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| look_angles(target, &s.position).1)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(TRAJECTORY_HEADER)?;
        for s in &self.states {
            wtr.write_record(&[
                s.t.to_string(),
                s.position.x.to_string(),
                s.position.y.to_string(),
                s.position.z.to_string(),
                s.velocity.x.to_string(),
                s.velocity.y.to_string(),
                s.velocity.z.to_string(),
                s.clock_rate.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn check_uniform(times: impl Iterator<Item = f64>) -> Result<()> {
    let times: Vec<f64> = times.collect();
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("non-finite timestamp"));
    }
    let n = times.len();
    if n < 2 {
        return Ok(());
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    for (k, w) in times.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::NonUniformSampling { index: k + 1 });
        }
    }
    for (k, &t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * dt;
        let tol = SPACING_TOL + 1e-13 * t.abs();
        if (t - expected).abs() > tol {
            return Err(Error::NonUniformSampling { index: k });
        }
    }
    Ok(())
}

/// Column layout of trajectory files.
pub const TRAJECTORY_HEADER: [&str; 8] = [
    "t", "x_m", "y_m", "z_m", "vx_ms", "vy_ms", "vz_ms", "clk_rate_ss",
];

/// Samples a circular orbit every `1/rate` seconds over `[t0, t0 + duration]`.
pub fn propagate_circular(spec: &OrbitSpec, t0: f64, duration: f64, rate: f64) -> Result<Pass> {
    spec.validate()?;
    if !(duration >= 0.0 && rate > 0.0 && duration.is_finite() && rate.is_finite()) {
        return Err(Error::invalid("duration must be non-negative and rate positive"));
    }
    let n = (duration * rate + 1e-9).floor() as usize + 1;
    let states = (0..n)
        .map(|k| {
            let t = t0 + k as f64 / rate;
            let (position, velocity) = spec.ecef_state(t);
            ReceiverState {
                t,
                position,
                velocity,
                clock_rate: 0.0,
            }
        })
        .collect();
    Pass::new("", states)
}

/// Search horizon for [`pass_over_target`], s.
const VISIBILITY_SEARCH_SPAN: f64 = 86_400.0;

/// First window after `spec.epoch` in which the receiver stays at or above
/// `min_elevation` as seen from `target` for the whole `duration`.
pub fn pass_over_target(
    spec: &OrbitSpec,
    target: &GeodeticPosition<f64>,
    duration: f64,
    rate: f64,
    min_elevation: f64,
) -> Result<Pass> {
    spec.validate()?;
    let step = 1.0;
    let n = (VISIBILITY_SEARCH_SPAN / step) as usize;
    let visible: Vec<bool> = (0..=n)
        .map(|k| {
            let (p, _) = spec.ecef_state(spec.epoch + k as f64 * step);
            look_angles(target, &p).1 >= min_elevation
        })
        .collect();
    let need = (duration / step).ceil() as usize;
    let mut run = 0usize;
    for (k, &ok) in visible.iter().enumerate() {
        run = if ok { run + 1 } else { 0 };
        if run > need {
            let start = spec.epoch + (k - need) as f64 * step;
            // Shift inside the coarse run until the fine samples satisfy the bound.
            for shift in [0.0, 0.25, 0.5, 0.75] {
                let pass = propagate_circular(spec, start + shift, duration, rate)?;
                if pass.elevations_from(target).iter().all(|&e| e >= min_elevation) {
                    return Ok(pass);
                }
            }
        }
    }
    Err(Error::NoVisibilityWindow)
}

/// Reads a trajectory CSV (see [`TRAJECTORY_HEADER`]).
pub fn read_trajectory<R: Read>(reader: R, label: &str) -> Result<Pass> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(Error::MalformedRecord {
            line: 1,
            message: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        });
    }
    let mut states = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line,
            message: e.to_string(),
        })?;
        let vals = parse_row(&rec, 8, line)?;
        states.push(ReceiverState {
            t: vals[0],
            position: Vec3::new(vals[1], vals[2], vals[3]),
            velocity: Vec3::new(vals[4], vals[5], vals[6]),
            clock_rate: vals[7],
        });
    }
    Pass::new(label, states)
}

pub(crate) fn parse_row(rec: &csv::StringRecord, width: usize, line: usize) -> Result<Vec<f64>> {
    if rec.len() != width {
        return Err(Error::MalformedRecord {
            line,
            message: format!("expected {width} fields, found {}", rec.len()),
        });
    }
    rec.iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRecord {
                    line,
                    message: format!("not a finite number: {f:?}"),
                })
        })
        .collect()
}

/// Loads a trajectory file; the pass label is the file stem.
pub fn load_trajectory(path: &Path) -> Result<Pass> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let f = std::fs::File::open(path)?;
    read_trajectory(std::io::BufReader::new(f), &label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn iss() -> OrbitSpec {
        OrbitSpec::default()
    }

    #[test]
    fn inertial_speed_at_iss_altitude() {
        let s = iss();
        assert_abs_diff_eq!(s.radius(), 6_786_137.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.inertial_speed(), 7664.04, epsilon = 0.01);
        let (_, v) = s.inertial_state(123.0);
        assert_abs_diff_eq!(v.norm(), s.inertial_speed(), epsilon = 1e-6);
    }

    #[test]
    fn zero_duration_gives_single_state() {
        let p = propagate_circular(&iss(), 10.0, 0.0, 20.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.displacement(), 0.0);
        assert_eq!(p.dt(), 0.0);
    }

    #[test]
    fn sixty_second_pass_displacement() {
        let p = propagate_circular(&iss(), 0.0, 60.0, 20.0).unwrap();
        assert_eq!(p.len(), 1201);
        let d = p.displacement();
        assert!((d - 441_650.0).abs() / 441_650.0 < 0.02, "displacement {d}");
        let speeds: Vec<f64> = p.states().iter().map(|s| s.velocity.norm()).collect();
        let lo = speeds.iter().cloned().fold(f64::MAX, f64::min);
        let hi = speeds.iter().cloned().fold(f64::MIN, f64::max);
        assert!((hi - lo) / lo < 0.005);
        assert!(lo > 7000.0 && hi < 8000.0);
    }

    #[test]
    fn ecef_velocity_is_derivative_of_position() {
        let s = OrbitSpec { raan: 40.0, arg_latitude: 20.0, ..iss() };
        let h = 1e-3;
        let (p0, _) = s.ecef_state(100.0 - h);
        let (p1, _) = s.ecef_state(100.0 + h);
        let (_, v) = s.ecef_state(100.0);
        let fd = (p1 - p0) / (2.0 * h);
        assert!((fd - v).norm() < 1e-3);
    }

    #[test]
    fn angular_momentum_constant() {
        let s = OrbitSpec { raan: 12.0, ..iss() };
        let h0 = {
            let (r, v) = s.inertial_state(0.0);
            r.cross(&v).norm()
        };
        for t in [10.0, 30.0, 60.0] {
            let (r, v) = s.inertial_state(t);
            assert!((r.cross(&v).norm() - h0).abs() / h0 < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_altitude() {
        let s = OrbitSpec { altitude: 100e3, ..iss() };
        assert!(propagate_circular(&s, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn overflying_hits_requested_point() {
        for asc in [true, false] {
            let s = OrbitSpec::overflying(408e3, 51.6, 40.0, 30.0, asc, 500.0).unwrap();
            let (p, v) = s.ecef_state(500.0);
            let lat = (p.z / p.norm()).asin().to_degrees();
            let lon = p.y.atan2(p.x).to_degrees();
            assert_abs_diff_eq!(lat, 40.0, epsilon = 1e-9);
            assert_abs_diff_eq!(lon, 30.0, epsilon = 1e-9);
            assert_eq!(v.z > 0.0, asc);
        }
    }

    #[test]
    fn prograde_ground_track_moves_east() {
        let s = OrbitSpec::overflying(408e3, 51.6, 20.0, 0.0, true, 0.0).unwrap();
        let p = propagate_circular(&s, 0.0, 60.0, 1.0).unwrap();
        let lon0 = p.states()[0].position.y.atan2(p.states()[0].position.x);
        let lon1 = p.states()[60].position.y.atan2(p.states()[60].position.x);
        assert!(lon1 > lon0);
    }

    #[test]
    fn pass_search_respects_min_elevation() {
        let target = GeodeticPosition::new(35.4, 35.95, 48.0).unwrap();
        let s = OrbitSpec { raan: 100.0, ..iss() };
        let p = pass_over_target(&s, &target, 60.0, 20.0, 8.0).unwrap();
        assert!(p.elevations_from(&target).iter().all(|&e| (8.0..=90.0).contains(&e)));
    }

    #[test]
    fn pass_search_fails_for_unreachable_target() {
        let target = GeodeticPosition::new(89.0, 0.0, 0.0).unwrap();
        let s = OrbitSpec { inclination: 10.0, ..iss() };
        assert!(matches!(
            pass_over_target(&s, &target, 60.0, 20.0, 8.0),
            Err(Error::NoVisibilityWindow)
        ));
    }

    #[test]
    fn distinct_raan_gives_distinct_tracks() {
        let target = GeodeticPosition::new(35.4, 35.95, 48.0).unwrap();
        let az: Vec<f64> = [0.0, 120.0, 240.0]
            .iter()
            .map(|&raan| {
                let s = OrbitSpec { raan, ..iss() };
                pass_over_target(&s, &target, 60.0, 1.0, 8.0)
                    .unwrap()
                    .ground_track_azimuth()
                    .unwrap()
            })
            .collect();
        // ground-track azimuth computed from each state sequence
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((az[i] - az[j]).abs() > 1e-3, "{az:?}");
            }
        }
    }

    #[test]
    fn csv_round_trip_and_gap_detection() {
        let s = OrbitSpec { raan: 5.0, ..iss() };
        let p = propagate_circular(&s, 100.0, 59.95, 20.0).unwrap().with_clock_rate(3e-10);
        assert_eq!(p.len(), 1200);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = read_trajectory(&buf[..], "").unwrap();
        assert_eq!(q.len(), 1200);
        for (a, b) in p.states().iter().zip(q.states()) {
            assert!((a.position - b.position).norm() <= 1e-6 * a.position.norm());
            assert_eq!(a.clock_rate, b.clock_rate);
        }

        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(10);
        let gapped = lines.join("\n");
        assert!(matches!(
            read_trajectory(gapped.as_bytes(), ""),
            Err(Error::NonUniformSampling { .. })
        ));

        let bad = "t,x_m,y_m,z_m,vx_ms,vy_ms,vz_ms,clk_rate_ss\n0,1,2,3,4,5,6,0\n1,1,2,x,4,5,6,0\n";
        match read_trajectory(bad.as_bytes(), "") {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
