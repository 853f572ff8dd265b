//! CINR-based interference survey.
//!
//! Receiver-reported CINR is range-compensated, compared against per-bin
//! statistics collected over interference-free (ocean) regions, and a 3-sigma
//! test is run on each one-second window of observables per band. Detections
//! are aggregated into latitude/longitude cells.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::consts::{GPS_L1_HZ, GPS_L2_HZ};
use crate::error::{Error, Result};
use crate::geodesy::free_space_path_loss_db;
use crate::scalar::Real;

// ── Noise floor and CINR filter ─────────────────────────────────────────

/// Two-level quantizer description for the front end (`a`) and the local
/// replica (`b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec<T> {
    pub a0: T,
    pub a1: T,
    pub b0: T,
    pub b1: T,
    pub p_a0: T,
    pub p_a1: T,
    pub p_b0: T,
    pub p_b1: T,
    /// Samples per accumulation.
    pub n: T,
}

impl<T: Real> QuantizationSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a0: T, a1: T, b0: T, b1: T, p_a0: T, p_a1: T, p_b0: T, p_b1: T, n: T) -> Result<Self> {
        let q = Self {
            a0,
            a1,
            b0,
            b1,
            p_a0,
            p_a1,
            p_b0,
            p_b1,
            n,
        };
        q.validate()?;
        Ok(q)
    }

    /// Values reported for the ISS receiver's 2-bit front end.
    pub fn foton() -> Self {
        Self {
            a0: T::lit(1.0),
            a1: T::lit(3.0),
            b0: T::lit(1.0),
            b1: T::lit(3.0),
            p_a0: T::lit(0.68269),
            p_a1: T::lit(0.31731),
            p_b0: T::lit(0.38418),
            p_b1: T::lit(0.61582),
            n: T::lit(5714.286),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-6);
        if (self.p_a0 + self.p_a1 - T::one()).abs() > tol || (self.p_b0 + self.p_b1 - T::one()).abs() > tol {
            return Err(Error::invalid("quantizer probabilities must sum to one"));
        }
        let probs = [self.p_a0, self.p_a1, self.p_b0, self.p_b1];
        if probs.iter().any(|p| *p < T::zero()) {
            return Err(Error::invalid("quantizer probabilities must be non-negative"));
        }
        if [self.a0, self.a1, self.b0, self.b1, self.n].iter().any(|v| !(*v > T::zero())) {
            return Err(Error::invalid("quantizer magnitudes and N must be positive"));
        }
        Ok(())
    }
}

/// Noise floor 2 sigma_IQ^2 = 2N (a0^2 p_a0 + a1^2 p_a1)(b0^2 p_b0 + b1^2 p_b1).
pub fn noise_floor<T: Real>(q: &QuantizationSpec<T>) -> T {
    let fa = q.a0 * q.a0 * q.p_a0 + q.a1 * q.a1 * q.p_a1;
    let fb = q.b0 * q.b0 * q.p_b0 + q.b1 * q.b1 * q.p_b1;
    T::lit(2.0) * q.n * fa * fb
}

/// Reported CINR when the smoothed power does not exceed the noise floor, dB-Hz.
pub const CINR_FLOOR_DBHZ: f64 = -10.0;

/// First-order low-pass estimate of E[I^2 + Q^2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CinrFilterState<T> {
    pub smoothed_power: T,
    /// K = T_a / tau.
    pub gain: T,
    /// Accumulation interval T_a, s.
    pub accumulation_interval: T,
    /// Filter time constant tau, s.
    pub tau_filter: T,
}

impl<T: Real> CinrFilterState<T> {
    pub fn new(accumulation_interval: T, tau_filter: T, initial_power: T) -> Result<Self> {
        if !(accumulation_interval > T::zero() && tau_filter > T::zero()) {
            return Err(Error::invalid("accumulation interval and time constant must be positive"));
        }
        let gain = accumulation_interval / tau_filter;
        if gain > T::one() {
            return Err(Error::invalid("filter gain T_a / tau must not exceed 1"));
        }
        if !(initial_power >= T::zero()) {
            return Err(Error::invalid("initial power must be non-negative"));
        }
        Ok(Self {
            smoothed_power: initial_power,
            gain,
            accumulation_interval,
            tau_filter,
        })
    }
}

/// Advances the filter by one accumulation and returns the new CINR in dB-Hz.
pub fn cinr_update<T: Real>(state: &CinrFilterState<T>, i_k: T, q_k: T, noise_floor: T) -> (CinrFilterState<T>, T) {
    let p = i_k * i_k + q_k * q_k;
    let smoothed = state.smoothed_power + state.gain * (p - state.smoothed_power);
    let next = CinrFilterState {
        smoothed_power: smoothed,
        ..*state
    };
    let linear = (smoothed / noise_floor - T::one()) / state.accumulation_interval;
    let db = if linear > T::zero() {
        T::lit(10.0) * linear.log10()
    } else {
        T::lit(CINR_FLOOR_DBHZ)
    };
    (next, db)
}

// ── Observables ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    L1,
    L2,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::L1, Band::L2];

    pub fn frequency(self) -> f64 {
        match self {
            Band::L1 => GPS_L1_HZ,
            Band::L2 => GPS_L2_HZ,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::L1 => "L1",
            Band::L2 => "L2",
        })
    }
}

impl FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" => Ok(Band::L1),
            "L2" => Ok(Band::L2),
            other => Err(Error::invalid(format!("unknown band {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    OceanControl,
    Survey,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::OceanControl => "ocean_control",
            Region::Survey => "survey",
        })
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocean_control" => Ok(Region::OceanControl),
            "survey" => Ok(Region::Survey),
            other => Err(Error::invalid(format!("unknown region {other:?}"))),
        }
    }
}

/// One receiver-reported CINR value with its geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub sv_id: u32,
    pub band: Band,
    /// dB-Hz.
    pub cinr: f64,
    /// Satellite-to-receiver range, m.
    pub r_sr: f64,
    /// Degrees.
    pub z_r: f64,
    /// Degrees.
    pub z_s: f64,
    /// Sub-receiver point, degrees.
    pub ground_lat: f64,
    pub ground_lon: f64,
    pub region: Region,
}

/// CINR with the free-space path loss of the satellite link added back, dB-Hz.
pub fn range_compensate(rec: &ObservableRecord) -> Result<f64> {
    Ok(rec.cinr + free_space_path_loss_db(rec.r_sr, rec.band.frequency())?)
}

/// Column layout of observables files.
pub const OBSERVABLES_HEADER: [&str; 10] = [
    "t", "sv_id", "band", "cinr_dbhz", "r_sr_m", "z_r_deg", "z_s_deg", "lat_deg", "lon_deg", "region",
];

pub fn write_observables<W: Write>(w: W, records: &[ObservableRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(OBSERVABLES_HEADER)?;
    for r in records {
        wtr.write_record([
            r.t.to_string(),
            r.sv_id.to_string(),
            r.band.to_string(),
            r.cinr.to_string(),
            r.r_sr.to_string(),
            r.z_r.to_string(),
            r.z_s.to_string(),
            r.ground_lat.to_string(),
            r.ground_lon.to_string(),
            r.region.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_observables<R: Read>(reader: R) -> Result<Vec<ObservableRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(OBSERVABLES_HEADER.iter().copied()) {
        return Err(Error::MalformedRecord {
            line: 1,
            message: format!("expected header {}", OBSERVABLES_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != OBSERVABLES_HEADER.len() {
            return Err(Error::MalformedRecord {
                line,
                message: format!("expected {} fields, found {}", OBSERVABLES_HEADER.len(), rec.len()),
            });
        }
        let bad = |what: &str| Error::MalformedRecord {
            line,
            message: format!("invalid {what}"),
        };
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(OBSERVABLES_HEADER[k]))
        };
        let r = ObservableRecord {
            t: num(0)?,
            sv_id: rec[1].trim().parse().map_err(|_| bad("sv_id"))?,
            band: rec[2].trim().parse().map_err(|_| bad("band"))?,
            cinr: num(3)?,
            r_sr: num(4)?,
            z_r: num(5)?,
            z_s: num(6)?,
            ground_lat: num(7)?,
            ground_lon: num(8)?,
            region: rec[9].trim().parse().map_err(|_| bad("region"))?,
        };
        if !(r.r_sr > 0.0) || r.z_r < 0.0 {
            return Err(bad("geometry (r_sr must be positive, z_r non-negative)"));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_observables(path: &Path) -> Result<Vec<ObservableRecord>> {
    read_observables(std::fs::File::open(path)?)
}

// ── Control statistics ──────────────────────────────────────────────────

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two disjoint accumulations.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb, nf) = (self.count as f64, other.count as f64, n as f64);
        Self {
            count: n,
            mean: self.mean + d * nb / nf,
            m2: self.m2 + other.m2 + d * d * na * nb / nf,
        }
    }

    /// Sample variance, or `None` with fewer than two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }
}

/// Control bin key: SV, band and receiver off-boresight bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinKey {
    pub sv_id: u32,
    pub band: Band,
    pub zr_bin: u32,
}

impl fmt::Display for BinKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.sv_id, self.band, self.zr_bin)
    }
}

impl FromStr for BinKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed bin key {s:?}"));
        let mut it = s.split('/');
        let (Some(sv), Some(band), Some(bin), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad());
        };
        Ok(Self {
            sv_id: sv.parse().map_err(|_| bad())?,
            band: band.parse()?,
            zr_bin: bin.parse().map_err(|_| bad())?,
        })
    }
}

/// Binning rule for the control grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    /// Degrees.
    pub bin_width: f64,
    /// Upper edge of the admissible receiver off-boresight window, degrees.
    pub z_r_max: f64,
    /// Minimum control samples for a bin to be usable.
    pub min_count: u64,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self {
            bin_width: 1.0,
            z_r_max: 15.0,
            min_count: 100,
        }
    }
}

impl BinningSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.z_r_max > 0.0 && self.min_count >= 2) {
            return Err(Error::invalid("binning needs positive width and window, min_count >= 2"));
        }
        Ok(())
    }

    /// Bin index for `z_r`, or `None` outside [0, z_r_max].
    pub fn zr_bin(&self, z_r: f64) -> Option<u32> {
        if !(0.0..=self.z_r_max).contains(&z_r) {
            return None;
        }
        let last = ((self.z_r_max / self.bin_width).ceil() as u32).saturating_sub(1);
        Some(((z_r / self.bin_width).floor() as u32).min(last))
    }

    pub fn key(&self, rec: &ObservableRecord) -> Option<BinKey> {
        self.zr_bin(rec.z_r).map(|zr_bin| BinKey {
            sv_id: rec.sv_id,
            band: rec.band,
            zr_bin,
        })
    }
}

/// Mergeable accumulator of range-compensated control CINR.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlAccumulator {
    pub binning: BinningSpec,
    pub bins: BTreeMap<BinKey, RunningStats>,
}

impl ControlAccumulator {
    pub fn new(binning: BinningSpec) -> Result<Self> {
        binning.validate()?;
        Ok(Self {
            binning,
            bins: BTreeMap::new(),
        })
    }

    /// Adds a record if it is tagged as control and falls in the window.
    /// Returns whether it was used.
    pub fn push(&mut self, rec: &ObservableRecord) -> Result<bool> {
        if rec.region != Region::OceanControl {
            return Ok(false);
        }
        let Some(key) = self.binning.key(rec) else {
            return Ok(false);
        };
        let c = range_compensate(rec)?;
        self.bins.entry(key).or_default().push(c);
        Ok(true)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.binning != other.binning {
            return Err(Error::invalid("cannot merge control grids with different binning"));
        }
        for (k, s) in &other.bins {
            let e = self.bins.entry(*k).or_default();
            *e = e.merge(s);
        }
        Ok(())
    }

    pub fn finish(&self) -> ControlGrid {
        let bins = self
            .bins
            .iter()
            .map(|(k, s)| {
                (
                    *k,
                    BinSummary {
                        count: s.count,
                        mean: s.mean,
                        variance: s.variance(),
                    },
                )
            })
            .collect();
        ControlGrid {
            binning: self.binning,
            bins,
        }
    }
}

/// Frozen per-bin statistics of range-compensated control CINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub count: u64,
    /// dB-Hz.
    pub mean: f64,
    /// dB^2; absent with fewer than two samples.
    pub variance: Option<f64>,
}

/// Control statistics used by the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub binning: BinningSpec,
    pub bins: BTreeMap<BinKey, BinSummary>,
}

#[derive(Serialize, Deserialize)]
struct ControlGridFile {
    schema_version: u32,
    binning: BinningSpec,
    bins: BTreeMap<String, BinSummary>,
}

pub const CONTROL_GRID_SCHEMA: u32 = 1;

impl ControlGrid {
    /// Mean and standard deviation of a usable bin.
    pub fn usable(&self, key: &BinKey) -> Option<(f64, f64)> {
        let b = self.bins.get(key)?;
        let var = b.variance?;
        (b.count >= self.binning.min_count && var > 0.0).then(|| (b.mean, var.sqrt()))
    }

    pub fn usable_bins(&self) -> usize {
        self.bins.keys().filter(|k| self.usable(k).is_some()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ControlGridFile {
            schema_version: CONTROL_GRID_SCHEMA,
            binning: self.binning,
            bins: self.bins.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ControlGridFile = serde_json::from_str(s)?;
        if file.schema_version != CONTROL_GRID_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported control grid schema version {}",
                file.schema_version
            )));
        }
        file.binning.validate()?;
        let bins = file
            .bins
            .into_iter()
            .map(|(k, v)| Ok((k.parse()?, v)))
            .collect::<Result<_>>()?;
        Ok(Self {
            binning: file.binning,
            bins,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Accumulates control records into per-bin statistics.
pub fn build_control_grid<'a, I>(records: I, binning: BinningSpec) -> Result<ControlGrid>
where
    I: IntoIterator<Item = &'a ObservableRecord>,
{
    let mut acc = ControlAccumulator::new(binning)?;
    for r in records {
        acc.push(r)?;
    }
    Ok(acc.finish())
}

// ── Detection ───────────────────────────────────────────────────────────

/// Threshold in standard deviations of the test statistic.
pub const DETECTION_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// Mean standardized range-compensated CINR over the window.
    pub statistic: f64,
    /// The statistic's H1 threshold, -3 / sqrt(records).
    pub threshold: f64,
    pub records: usize,
    pub decision: Hypothesis,
}

/// Tests one window of same-band records against the control grid.
///
/// The statistic is the mean of `(C_hat - mean_bin) / sigma_bin`; under H0 it
/// has variance `1 / m` for `m` records, so H1 is declared when it falls
/// below `-3 / sqrt(m)`.
pub fn detect(records: &[ObservableRecord], grid: &ControlGrid, band: Band) -> Result<TestOutcome> {
    if records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sum = 0.0;
    for r in records {
        if r.band != band {
            return Err(Error::invalid(format!("record for {} in a {band} test", r.band)));
        }
        let key = grid
            .binning
            .key(r)
            .ok_or_else(|| Error::UnusableBin(format!("z_r {} outside the admissible window", r.z_r)))?;
        let (mean, sd) = grid.usable(&key).ok_or_else(|| Error::UnusableBin(key.to_string()))?;
        sum += (range_compensate(r)? - mean) / sd;
    }
    let m = records.len() as f64;
    let statistic = sum / m;
    let threshold = -DETECTION_SIGMA / m.sqrt();
    Ok(TestOutcome {
        statistic,
        threshold,
        records: records.len(),
        decision: if statistic < threshold { Hypothesis::H1 } else { Hypothesis::H0 },
    })
}

/// Decision for one window of survey records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowDecision {
    pub window_start: f64,
    pub band: Band,
    /// Sub-receiver point of the window's first record.
    pub lat: f64,
    pub lon: f64,
    pub outcome: TestOutcome,
}

/// Groups time-ordered survey records into windows of `window` seconds per
/// band and tests each. Control records, records outside the off-boresight
/// window and records in unusable bins are skipped.
pub fn detect_windows<'a, I>(records: I, grid: &ControlGrid, window: f64) -> Result<Vec<WindowDecision>>
where
    I: IntoIterator<Item = &'a ObservableRecord>,
{
    if !(window > 0.0) {
        return Err(Error::invalid("window must be positive"));
    }
    let mut out = Vec::new();
    let mut current: Option<i64> = None;
    let mut pending: BTreeMap<Band, Vec<ObservableRecord>> = BTreeMap::new();
    let flush = |idx: i64, pending: &mut BTreeMap<Band, Vec<ObservableRecord>>, out: &mut Vec<WindowDecision>| {
        for (band, recs) in std::mem::take(pending) {
            let first = recs[0];
            let outcome = detect(&recs, grid, band)?;
            out.push(WindowDecision {
                window_start: idx as f64 * window,
                band,
                lat: first.ground_lat,
                lon: first.ground_lon,
                outcome,
            });
        }
        Ok::<(), Error>(())
    };
    for r in records {
        if r.region != Region::Survey {
            continue;
        }
        let Some(key) = grid.binning.key(r) else { continue };
        if grid.usable(&key).is_none() {
            continue;
        }
        let idx = (r.t / window).floor() as i64;
        match current {
            Some(c) if c == idx => {}
            Some(c) if idx < c => {
                return Err(Error::invalid("survey records must be in time order"));
            }
            Some(c) => {
                flush(c, &mut pending, &mut out)?;
                current = Some(idx);
            }
            None => current = Some(idx),
        }
        pending.entry(r.band).or_default().push(*r);
    }
    if let Some(c) = current {
        flush(c, &mut pending, &mut out)?;
    }
    Ok(out)
}

// ── Hotspot maps ────────────────────────────────────────────────────────

/// Event and test counts for one map cell and band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// floor(lat / cell_size).
    pub lat_bin: i32,
    /// floor(lon / cell_size).
    pub lon_bin: i32,
    pub band: Band,
    pub tests: u64,
    pub events: u64,
    pub ratio: f64,
}

impl DetectionResult {
    /// (lat_min, lon_min, lat_max, lon_max) in degrees.
    pub fn bounds(&self, cell_size: f64) -> (f64, f64, f64, f64) {
        let lat0 = self.lat_bin as f64 * cell_size;
        let lon0 = self.lon_bin as f64 * cell_size;
        (lat0, lon0, lat0 + cell_size, lon0 + cell_size)
    }
}

/// Counts tests and H1 decisions per cell and band. Output is ordered by
/// band, then latitude bin, then longitude bin.
pub fn hotspot_map<I>(decisions: I, cell_size: f64) -> Result<Vec<DetectionResult>>
where
    I: IntoIterator<Item = (f64, f64, Band, Hypothesis)>,
{
    if !(cell_size > 0.0) {
        return Err(Error::invalid("cell size must be positive"));
    }
    let mut cells: BTreeMap<(Band, i32, i32), (u64, u64)> = BTreeMap::new();
    for (lat, lon, band, h) in decisions {
        let key = (band, (lat / cell_size).floor() as i32, (lon / cell_size).floor() as i32);
        let c = cells.entry(key).or_default();
        c.0 += 1;
        if h == Hypothesis::H1 {
            c.1 += 1;
        }
    }
    Ok(cells
        .into_iter()
        .map(|((band, lat_bin, lon_bin), (tests, events))| DetectionResult {
            lat_bin,
            lon_bin,
            band,
            tests,
            events,
            ratio: events as f64 / tests as f64,
        })
        .collect())
}

/// Hotspot map from window decisions.
pub fn hotspot_map_from_windows(decisions: &[WindowDecision], cell_size: f64) -> Result<Vec<DetectionResult>> {
    hotspot_map(
        decisions.iter().map(|d| (d.lat, d.lon, d.band, d.outcome.decision)),
        cell_size,
    )
}

/// GeoJSON FeatureCollection of cell polygons.
pub fn hotspots_geojson(cells: &[DetectionResult], cell_size: f64) -> serde_json::Value {
    let features: Vec<_> = cells
        .iter()
        .map(|c| {
            let (lat0, lon0, lat1, lon1) = c.bounds(cell_size);
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]],
                },
                "properties": {
                    "band": c.band.to_string(),
                    "tests": c.tests,
                    "events": c.events,
                    "ratio": c.ratio,
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_hotspots_csv<W: Write>(w: W, cells: &[DetectionResult], cell_size: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["band", "lat_min", "lon_min", "lat_max", "lon_max", "tests", "events", "ratio"])?;
    for c in cells {
        let (lat0, lon0, lat1, lon1) = c.bounds(cell_size);
        wtr.write_record([
            c.band.to_string(),
            lat0.to_string(),
            lon0.to_string(),
            lat1.to_string(),
            lon1.to_string(),
            c.tests.to_string(),
            c.events.to_string(),
            c.ratio.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub mod synth;
