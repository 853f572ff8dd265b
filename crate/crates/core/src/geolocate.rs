//! Doppler measurement model and the multi-pass batch estimator.
//!
//! The observed Doppler at the receiver is
//!
//! ```text
//! f_D = -r^T v_R / lambda - c [dR - dT (1 - dR)] / lambda + w
//! ```
//!
//! with `r` the unit vector from transmitter to receiver, `v_R` the receiver
//! ECEF velocity, `dR`/`dT` the receiver and transmitter clock frequency
//! errors (s/s) and `w` white Gaussian noise. The estimator solves for the
//! transmitter ECEF position plus one constant `dT` per capture by weighted
//! Gauss-Newton with Levenberg damping, optionally constrained by an altitude
//! pseudo-measurement.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clocks::{random_walk_with, ClockModel};
use crate::consts::{GPS_L1_HZ, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::geodesy::{ecef_to_geodetic, enu_basis, geodetic_to_ecef, spherical_destination};
use crate::orbits::{parse_row, read_trajectory, Pass, ReceiverState};
use crate::{Ecef, Geodetic};

/// Transmitter position, per-capture clock rates and carrier frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterState {
    pub position: Geodetic,
    /// Constant clock frequency error per capture label, s/s.
    pub clock_rate_per_pass: BTreeMap<String, f64>,
    /// Nominal carrier, Hz.
    pub frequency: f64,
}

impl TransmitterState {
    pub fn new(position: Geodetic) -> Self {
        Self {
            position,
            clock_rate_per_pass: BTreeMap::new(),
            frequency: GPS_L1_HZ,
        }
    }

    pub fn with_clock_rate(mut self, label: impl Into<String>, rate: f64) -> Self {
        self.clock_rate_per_pass.insert(label.into(), rate);
        self
    }

    pub fn clock_rate(&self, label: &str) -> f64 {
        self.clock_rate_per_pass.get(label).copied().unwrap_or(0.0)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerMeasurement {
    pub t: f64,
    /// Observed Doppler, Hz.
    pub f_d: f64,
    /// Standard deviation of the white error term, Hz.
    pub sigma: f64,
}

/// Doppler measurements aligned one-to-one with the states of a pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassCapture {
    pub pass: Pass,
    pub measurements: Vec<DopplerMeasurement>,
}

impl PassCapture {
    pub fn new(pass: Pass, measurements: Vec<DopplerMeasurement>) -> Result<Self> {
        if pass.len() != measurements.len() {
            return Err(Error::invalid(format!(
                "capture has {} measurements for {} receiver states",
                measurements.len(),
                pass.len()
            )));
        }
        for (i, (s, m)) in pass.states().iter().zip(&measurements).enumerate() {
            if (s.t - m.t).abs() > 1e-9 {
                return Err(Error::invalid(format!("measurement {i} not aligned with its receiver state")));
            }
            if !(m.sigma > 0.0) || !m.f_d.is_finite() {
                return Err(Error::invalid(format!("measurement {i} needs finite Doppler and sigma > 0")));
            }
        }
        Ok(Self { pass, measurements })
    }

    pub fn label(&self) -> &str {
        &self.pass.label
    }

    /// Replaces every measurement sigma (the weight used by the estimator).
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        for m in &mut self.measurements {
            m.sigma = sigma;
        }
        Ok(self)
    }
}

/// Column layout of capture files.
pub const CAPTURE_HEADER: [&str; 3] = ["t", "f_d_hz", "sigma_hz"];

/// Sidecar naming the trajectory a capture file belongs to. Relative paths
/// resolve against the sidecar's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureSidecar {
    pub capture: PathBuf,
    pub trajectory: PathBuf,
    pub label: String,
}

impl PassCapture {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(CAPTURE_HEADER)?;
        for m in &self.measurements {
            wtr.write_record(&[m.t.to_string(), m.f_d.to_string(), m.sigma.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv`, `<stem>.traj.csv` and the `<stem>.json` sidecar
    /// into `dir`, returning the sidecar path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let sidecar = CaptureSidecar {
            capture: format!("{stem}.csv").into(),
            trajectory: format!("{stem}.traj.csv").into(),
            label: self.pass.label.clone(),
        };
        self.pass.save(&dir.join(&sidecar.trajectory))?;
        let f = std::fs::File::create(dir.join(&sidecar.capture))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Reads a capture CSV (see [`CAPTURE_HEADER`]) against its pass.
pub fn read_capture<R: Read>(reader: R, pass: Pass) -> Result<PassCapture> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CAPTURE_HEADER.iter().copied()) {
        return Err(Error::MalformedRecord {
            line: 1,
            message: format!("expected header {}", CAPTURE_HEADER.join(",")),
        });
    }
    let mut measurements = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line,
            message: e.to_string(),
        })?;
        let v = parse_row(&rec, 3, line)?;
        if !(v[2] > 0.0) {
            return Err(Error::MalformedRecord {
                line,
                message: "sigma_hz must be positive".into(),
            });
        }
        measurements.push(DopplerMeasurement {
            t: v[0],
            f_d: v[1],
            sigma: v[2],
        });
    }
    PassCapture::new(pass, measurements)
}

/// Loads a capture through its sidecar JSON.
pub fn load_capture(sidecar_path: &Path) -> Result<PassCapture> {
    let text = std::fs::read_to_string(sidecar_path)?;
    let sidecar: CaptureSidecar = serde_json::from_str(&text)?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let f = std::fs::File::open(dir.join(&sidecar.trajectory))?;
    let pass = read_trajectory(std::io::BufReader::new(f), &sidecar.label)?;
    let f = std::fs::File::open(dir.join(&sidecar.capture))?;
    read_capture(std::io::BufReader::new(f), pass)
}

/// Doppler (Hz) predicted for an ECEF transmitter position.
pub fn doppler_from_ecef(tx: &Ecef, tx_clock_rate: f64, rx: &ReceiverState, frequency: f64) -> Result<f64> {
    let los = rx.position - *tx;
    let range = los.norm();
    if !(range > 0.0) {
        return Err(Error::invalid("transmitter and receiver coincide"));
    }
    let lambda = SPEED_OF_LIGHT / frequency;
    let radial = los.dot(&rx.velocity) / range;
    let clock = SPEED_OF_LIGHT * (rx.clock_rate - tx_clock_rate * (1.0 - rx.clock_rate));
    Ok(-(radial + clock) / lambda)
}

/// Doppler (Hz) predicted for a transmitter at a geodetic position.
pub fn predict_doppler(tx_pos: &Geodetic, tx_clock_rate: f64, rx: &ReceiverState, frequency: f64) -> Result<f64> {
    doppler_from_ecef(&geodetic_to_ecef(tx_pos), tx_clock_rate, rx, frequency)
}

/// Measurement sigma reported when a capture is synthesized without white noise.
pub const UNIT_WEIGHT_SIGMA: f64 = 1.0;

/// Generates a capture: true Doppler with a random-walk transmitter clock
/// (starting at the pass's configured rate) plus white noise of `w_sigma` Hz.
///
/// When `w_sigma` is zero the measurements carry [`UNIT_WEIGHT_SIGMA`].
pub fn synthesize_capture(
    tx: &TransmitterState,
    pass: &Pass,
    clock_model: &ClockModel,
    w_sigma: f64,
    seed: u64,
) -> Result<PassCapture> {
    if pass.is_empty() {
        return Err(Error::invalid("cannot synthesize a capture for an empty pass"));
    }
    if !(w_sigma >= 0.0) {
        return Err(Error::invalid("w_sigma must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pass.len();
    let walk = if n > 1 {
        random_walk_with::<f64, _>(&mut rng, clock_model, pass.dt(), n)?.values
    } else {
        vec![0.0]
    };
    let noise = Normal::new(0.0, w_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let tx_ecef = geodetic_to_ecef(&tx.position);
    let base_rate = tx.clock_rate(&pass.label);
    let sigma = if w_sigma > 0.0 { w_sigma } else { UNIT_WEIGHT_SIGMA };
    let measurements = pass
        .states()
        .iter()
        .zip(&walk)
        .map(|(s, dy)| {
            let truth = doppler_from_ecef(&tx_ecef, base_rate + dy, s, tx.frequency)?;
            let w = if w_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Ok(DopplerMeasurement {
                t: s.t,
                f_d: truth + w,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PassCapture::new(pass.clone(), measurements)
}

/// Horizontal confidence ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEllipse {
    /// Semi-major axis, m.
    pub a: f64,
    /// Semi-minor axis, m.
    pub b: f64,
    /// Major-axis direction, degrees east of north in [0, 180).
    pub orientation: f64,
    pub confidence: f64,
}

/// Chi-square quantile with two degrees of freedom.
pub fn chi2_2dof_quantile(confidence: f64) -> f64 {
    -2.0 * (1.0 - confidence).ln()
}

/// Confidence ellipse of a 2x2 east/north covariance (m^2).
pub fn error_ellipse(cov: &[[f64; 2]; 2], confidence: f64) -> Result<ErrorEllipse> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence must lie in (0, 1)"));
    }
    let (see, snn) = (cov[0][0], cov[1][1]);
    let sen = 0.5 * (cov[0][1] + cov[1][0]);
    let mean = 0.5 * (see + snn);
    let half_diff = 0.5 * (see - snn);
    let rad = half_diff.hypot(sen);
    let (l1, l2) = (mean + rad, mean - rad);
    let tol = 1e-9 * l1.abs().max(1.0);
    if l2 < -tol || !l1.is_finite() {
        return Err(Error::NegativeVariance(l2));
    }
    let q = chi2_2dof_quantile(confidence);
    // major eigenvector (e, n) satisfies tan(2 theta) = 2 sen / (see - snn),
    // theta measured from east; convert to an azimuth from north
    let theta_from_east = 0.5 * (2.0 * sen).atan2(see - snn);
    let orientation = if rad == 0.0 {
        0.0
    } else {
        (90.0 - theta_from_east.to_degrees()).rem_euclid(180.0)
    };
    Ok(ErrorEllipse {
        a: (l1.max(0.0) * q).sqrt(),
        b: (l2.max(0.0) * q).sqrt(),
        orientation,
        confidence,
    })
}

/// Altitude pseudo-measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltitudePrior {
    /// Meters above the ellipsoid.
    pub altitude: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub max_iterations: usize,
    /// Position step below which the solve has converged, m.
    pub step_tolerance: f64,
    /// Relative cost change below which the solve has converged.
    pub cost_tolerance: f64,
    /// Largest admissible condition number of the scaled normal matrix.
    pub max_condition: f64,
    /// Half-width of the initialization grid, m.
    pub grid_half_span: f64,
    /// Initialization grid spacing, m.
    pub grid_spacing: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-4,
            cost_tolerance: 1e-10,
            max_condition: 1e12,
            grid_half_span: 1_500e3,
            grid_spacing: 50e3,
        }
    }
}

/// Post-fit residuals of one capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassResiduals {
    pub label: String,
    /// Measured minus predicted Doppler, Hz.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Batch estimate of the transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeolocationSolution {
    pub transmitter: TransmitterState,
    pub ecef: Ecef,
    /// Covariance over (east m, north m, up m, per-capture clock rates in
    /// capture order), local frame at the estimate.
    pub covariance: Vec<Vec<f64>>,
    pub ellipse95: ErrorEllipse,
    pub ellipse99: ErrorEllipse,
    pub postfit_residuals: Vec<PassResiduals>,
    /// Weighted sum of squared residuals, including the altitude term.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GeolocationSolution {
    /// East/north covariance block, m^2.
    pub fn horizontal_covariance(&self) -> [[f64; 2]; 2] {
        let c = &self.covariance;
        [[c[0][0], c[0][1]], [c[1][0], c[1][1]]]
    }
}

/// Per-capture mean and sample standard deviation of the post-fit residuals.
pub fn postfit_residual_stats(sol: &GeolocationSolution) -> Vec<(String, ResidualStats)> {
    sol.postfit_residuals
        .iter()
        .map(|p| (p.label.clone(), residual_stats(&p.residuals)))
        .collect()
}

pub fn residual_stats(values: &[f64]) -> ResidualStats {
    let n = values.len();
    if n == 0 {
        return ResidualStats { mean: 0.0, std: 0.0, count: 0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    ResidualStats { mean, std, count: n }
}

// ── Solver ──────────────────────────────────────────────────────────────

/// Unknowns: ECEF position (m) and c * dT per capture (m/s).
struct Problem<'a> {
    captures: &'a [PassCapture],
    prior: Option<AltitudePrior>,
    frequency: f64,
}

struct Normal_ {
    info: DMatrix<f64>,
    grad: DVector<f64>,
    cost: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        3 + self.captures.len()
    }

    fn cost(&self, x: &DVector<f64>) -> Result<f64> {
        let tx = Ecef::new(x[0], x[1], x[2]);
        let mut cost = 0.0;
        for (k, cap) in self.captures.iter().enumerate() {
            let rate = x[3 + k] / SPEED_OF_LIGHT;
            for (s, m) in cap.pass.states().iter().zip(&cap.measurements) {
                let r = (m.f_d - doppler_from_ecef(&tx, rate, s, self.frequency)?) / m.sigma;
                cost += r * r;
            }
        }
        if let Some(p) = self.prior {
            let h = ecef_to_geodetic(&tx)?.altitude;
            cost += ((h - p.altitude) / p.sigma).powi(2);
        }
        Ok(cost)
    }

    /// Information matrix J^T W J, gradient J^T W r (r = measured - predicted) and cost.
    fn normal(&self, x: &DVector<f64>) -> Result<Normal_> {
        let n = self.dim();
        let tx = Ecef::new(x[0], x[1], x[2]);
        let lambda = SPEED_OF_LIGHT / self.frequency;
        let mut info = DMatrix::<f64>::zeros(n, n);
        let mut grad = DVector::<f64>::zeros(n);
        let mut cost = 0.0;
        let mut row = vec![0.0; n];
        for (k, cap) in self.captures.iter().enumerate() {
            let rate = x[3 + k] / SPEED_OF_LIGHT;
            let col = 3 + k;
            for (s, m) in cap.pass.states().iter().zip(&cap.measurements) {
                let los = s.position - tx;
                let range = los.norm();
                if !(range > 0.0) {
                    return Err(Error::invalid("transmitter estimate coincides with receiver"));
                }
                let u = los / range;
                let pred = doppler_from_ecef(&tx, rate, s, self.frequency)?;
                let w = 1.0 / m.sigma;
                let r = (m.f_d - pred) * w;
                // d f / d tx = (v - u (u.v)) / (range lambda)
                let dpos = (s.velocity - u * u.dot(&s.velocity)) / (range * lambda);
                row.iter_mut().for_each(|v| *v = 0.0);
                row[0] = dpos.x * w;
                row[1] = dpos.y * w;
                row[2] = dpos.z * w;
                row[col] = (1.0 - s.clock_rate) / lambda * w;
                accumulate(&mut info, &mut grad, &row, r, &[0, 1, 2, col]);
                cost += r * r;
            }
        }
        if let Some(p) = self.prior {
            let geo = ecef_to_geodetic(&tx)?;
            let up = enu_basis(&geo)[2];
            let w = 1.0 / p.sigma;
            let r = (p.altitude - geo.altitude) * w;
            row.iter_mut().for_each(|v| *v = 0.0);
            row[0] = up.x * w;
            row[1] = up.y * w;
            row[2] = up.z * w;
            accumulate(&mut info, &mut grad, &row, r, &[0, 1, 2]);
            cost += r * r;
        }
        Ok(Normal_ { info, grad, cost })
    }
}

fn accumulate(info: &mut DMatrix<f64>, grad: &mut DVector<f64>, row: &[f64], r: f64, idx: &[usize]) {
    for &i in idx {
        grad[i] += row[i] * r;
        for &j in idx {
            info[(i, j)] += row[i] * row[j];
        }
    }
}

/// Condition number of the Jacobi-scaled information matrix.
fn scaled_condition(info: &DMatrix<f64>) -> f64 {
    let n = info.nrows();
    let d: Vec<f64> = (0..n).map(|i| info[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| info[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn solve_damped(info: &DMatrix<f64>, grad: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let mut a = info.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += damping * info[(i, i)].max(1e-30);
    }
    a.clone().cholesky().map(|c| c.solve(grad)).or_else(|| a.lu().solve(grad))
}

struct Fit {
    x: DVector<f64>,
    normal: Normal_,
    converged: bool,
    iterations: usize,
}

fn gauss_newton(problem: &Problem, x0: DVector<f64>, opts: &EstimatorOptions) -> Result<Fit> {
    let mut x = x0;
    let mut normal = problem.normal(&x)?;
    let mut damping = 0.0;
    for it in 1..=opts.max_iterations {
        let mut accepted = None;
        for _ in 0..12 {
            let Some(step) = solve_damped(&normal.info, &normal.grad, damping) else {
                damping = if damping == 0.0 { 1e-6 } else { damping * 10.0 };
                continue;
            };
            let trial = &x + &step;
            let trial_cost = match problem.cost(&trial) {
                Ok(c) if c.is_finite() => c,
                _ => f64::INFINITY,
            };
            if trial_cost <= normal.cost {
                accepted = Some((trial, step, trial_cost));
                damping = if damping == 0.0 { 0.0 } else { (damping / 10.0).max(1e-12) };
                if damping < 1e-9 {
                    damping = 0.0;
                }
                break;
            }
            damping = if damping == 0.0 { 1e-6 } else { damping * 10.0 };
        }
        let Some((trial, step, trial_cost)) = accepted else {
            // no descent direction left: we are at the numerical minimum
            return Ok(Fit { x, normal, converged: true, iterations: it });
        };
        let prev_cost = normal.cost;
        x = trial;
        normal = problem.normal(&x)?;
        let pos_step = (step[0].powi(2) + step[1].powi(2) + step[2].powi(2)).sqrt();
        let rel = (prev_cost - trial_cost).abs() / prev_cost.max(1e-300);
        if pos_step < opts.step_tolerance || rel < opts.cost_tolerance || normal.cost < 1e-24 {
            return Ok(Fit { x, normal, converged: true, iterations: it });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
    })
}

/// Least-squares clock term for a fixed position with all clocks zero:
/// returns the cost after fitting a constant per capture.
fn grid_cost(problem: &Problem, tx: &Ecef, stride: usize) -> f64 {
    let mut total = 0.0;
    for cap in problem.captures {
        let (mut sw, mut swr, mut swrr) = (0.0, 0.0, 0.0);
        for (s, m) in cap.pass.states().iter().zip(&cap.measurements).step_by(stride) {
            let Ok(pred) = doppler_from_ecef(tx, 0.0, s, problem.frequency) else {
                return f64::INFINITY;
            };
            // the clock enters with coefficient (1 - dR) / lambda; close enough
            // to constant across a capture for the coarse search
            let w = 1.0 / (m.sigma * m.sigma);
            let r = m.f_d - pred;
            sw += w;
            swr += w * r;
            swrr += w * r * r;
        }
        total += swrr - swr * swr / sw;
    }
    total
}

fn clock_init(problem: &Problem, tx: &Ecef) -> Result<Vec<f64>> {
    let lambda = SPEED_OF_LIGHT / problem.frequency;
    problem
        .captures
        .iter()
        .map(|cap| {
            let (mut sw, mut swr) = (0.0, 0.0);
            for (s, m) in cap.pass.states().iter().zip(&cap.measurements) {
                let pred = doppler_from_ecef(tx, 0.0, s, problem.frequency)?;
                let w = 1.0 / (m.sigma * m.sigma);
                sw += w;
                swr += w * (m.f_d - pred) * lambda / (1.0 - s.clock_rate);
            }
            Ok(swr / sw)
        })
        .collect()
}

fn grid_candidates(problem: &Problem, opts: &EstimatorOptions, altitude: f64) -> Result<Vec<Ecef>> {
    // centroid of the mid-capture sub-receiver points
    let mut centroid = Ecef::zero();
    for cap in problem.captures {
        let mid = cap.pass.states()[cap.pass.len() / 2].position;
        centroid += mid.unit();
    }
    let sub = ecef_to_geodetic(&(centroid.unit() * 6_371_000.0))?;
    let total: usize = problem.captures.iter().map(|c| c.measurements.len()).sum();
    let stride = (total / 400).max(1);

    let steps = (opts.grid_half_span / opts.grid_spacing).floor() as i64;
    let mut nodes: Vec<(f64, Ecef)> = Vec::new();
    for i in -steps..=steps {
        for j in -steps..=steps {
            let (de, dn) = (i as f64 * opts.grid_spacing, j as f64 * opts.grid_spacing);
            let dist = de.hypot(dn);
            let (lat, lon) = spherical_destination(sub.latitude, sub.longitude, de.atan2(dn).to_degrees(), dist);
            let Ok(g) = Geodetic::new(lat, lon, altitude) else { continue };
            let p = geodetic_to_ecef(&g);
            nodes.push((grid_cost(problem, &p, stride), p));
        }
    }
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // keep a handful of well-separated low-cost nodes
    let mut picked: Vec<Ecef> = Vec::new();
    for (_, p) in nodes {
        if picked.iter().all(|q| (*q - p).norm() > 4.0 * opts.grid_spacing) {
            picked.push(p);
            if picked.len() == 4 {
                break;
            }
        }
    }
    Ok(picked)
}

/// Batch maximum-likelihood estimate of a stationary transmitter from one or
/// more captures, each with its own constant clock rate.
pub fn estimate(
    captures: &[PassCapture],
    altitude_prior: Option<AltitudePrior>,
    init: Option<Geodetic>,
    frequency: f64,
    opts: &EstimatorOptions,
) -> Result<GeolocationSolution> {
    if captures.is_empty() {
        return Err(Error::invalid("at least one capture is required"));
    }
    if let Some(p) = altitude_prior {
        if !(p.sigma > 0.0) {
            return Err(Error::invalid("altitude prior sigma must be positive"));
        }
    }
    let mut labels: Vec<&str> = captures.iter().map(|c| c.label()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != captures.len() {
        return Err(Error::invalid("capture labels must be unique"));
    }
    let problem = Problem {
        captures,
        prior: altitude_prior,
        frequency,
    };

    let starts = match init {
        Some(g) => vec![geodetic_to_ecef(&g)],
        None => grid_candidates(&problem, opts, altitude_prior.map_or(0.0, |p| p.altitude))?,
    };

    let mut best: Option<Fit> = None;
    let mut last_err = None;
    for start in starts {
        let mut x0 = DVector::zeros(problem.dim());
        x0[0] = start.x;
        x0[1] = start.y;
        x0[2] = start.z;
        for (k, b) in clock_init(&problem, &start)?.into_iter().enumerate() {
            x0[3 + k] = b;
        }
        match gauss_newton(&problem, x0, opts) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.normal.cost < b.normal.cost) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let fit = match (best, last_err) {
        (Some(f), _) => f,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::NonConvergence { iterations: 0 }),
    };

    let condition = scaled_condition(&fit.normal.info);
    if !(condition <= opts.max_condition) {
        return Err(Error::SingularGeometry { condition });
    }
    let inv = fit
        .normal
        .info
        .clone()
        .try_inverse()
        .ok_or(Error::SingularGeometry { condition })?;

    let ecef = Ecef::new(fit.x[0], fit.x[1], fit.x[2]);
    let position = ecef_to_geodetic(&ecef)?;
    let n = problem.dim();
    let [e, nn, u] = enu_basis(&position);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for (r, axis) in [e, nn, u].iter().enumerate() {
        t[(r, 0)] = axis.x;
        t[(r, 1)] = axis.y;
        t[(r, 2)] = axis.z;
    }
    for k in 3..n {
        t[(k, k)] = 1.0 / SPEED_OF_LIGHT;
    }
    let cov = &t * inv * t.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let covariance: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect();
    let horiz = [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]];

    let mut transmitter = TransmitterState {
        position,
        clock_rate_per_pass: BTreeMap::new(),
        frequency,
    };
    let mut postfit_residuals = Vec::with_capacity(captures.len());
    for (k, cap) in captures.iter().enumerate() {
        let rate = fit.x[3 + k] / SPEED_OF_LIGHT;
        transmitter.clock_rate_per_pass.insert(cap.label().to_string(), rate);
        let residuals = cap
            .pass
            .states()
            .iter()
            .zip(&cap.measurements)
            .map(|(s, m)| Ok(m.f_d - doppler_from_ecef(&ecef, rate, s, frequency)?))
            .collect::<Result<Vec<f64>>>()?;
        postfit_residuals.push(PassResiduals {
            label: cap.label().to_string(),
            residuals,
        });
    }

    Ok(GeolocationSolution {
        transmitter,
        ecef,
        covariance,
        ellipse95: error_ellipse(&horiz, 0.95)?,
        ellipse99: error_ellipse(&horiz, 0.99)?,
        postfit_residuals,
        cost: fit.normal.cost,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

/// Horizontal (east, north) offset in meters of `p` from `origin`, in the
/// local frame at `origin`.
pub fn horizontal_offset(origin: &Geodetic, p: &Geodetic) -> (f64, f64) {
    let [e, n, _] = enu_basis(origin);
    let d = geodetic_to_ecef(p) - geodetic_to_ecef(origin);
    (d.dot(&e), d.dot(&n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{propagate_circular, OrbitSpec};
    use approx::assert_abs_diff_eq;

    fn rx_static() -> ReceiverState {
        ReceiverState {
            t: 0.0,
            position: Ecef::new(7.0e6, 0.0, 0.0),
            velocity: Ecef::zero(),
            clock_rate: 0.0,
        }
    }

    #[test]
    fn static_receiver_zero_clock() {
        let tx = Geodetic::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(predict_doppler(&tx, 0.0, &rx_static(), GPS_L1_HZ).unwrap(), 0.0);
    }

    #[test]
    fn receding_receiver() {
        let tx = Geodetic::new(0.0, 0.0, 0.0).unwrap();
        let rx = ReceiverState {
            velocity: Ecef::new(7360.0, 0.0, 0.0),
            ..rx_static()
        };
        let f = predict_doppler(&tx, 0.0, &rx, GPS_L1_HZ).unwrap();
        let lambda = SPEED_OF_LIGHT / GPS_L1_HZ;
        assert_abs_diff_eq!(lambda, 0.190294, epsilon = 1e-6);
        assert_abs_diff_eq!(f, -7360.0 / lambda, epsilon = 1e-9);
        assert_abs_diff_eq!(f, -38677.0, epsilon = 1.0);
    }

    #[test]
    fn transmitter_clock_offset() {
        let tx = Geodetic::new(0.0, 0.0, 0.0).unwrap();
        let f = predict_doppler(&tx, 1e-9, &rx_static(), GPS_L1_HZ).unwrap();
        assert_abs_diff_eq!(f, 1.57542, epsilon = 1e-9);
    }

    #[test]
    fn coincident_positions_rejected() {
        let tx = Ecef::new(7.0e6, 0.0, 0.0);
        assert!(doppler_from_ecef(&tx, 0.0, &rx_static(), GPS_L1_HZ).is_err());
    }

    #[test]
    fn ellipse_examples() {
        let q = chi2_2dof_quantile(0.95);
        assert_abs_diff_eq!(q, 5.991, epsilon = 1e-3);
        let c = error_ellipse(&[[1.0, 0.0], [0.0, 1.0]], 0.95).unwrap();
        assert_abs_diff_eq!(c.a, 2.448, epsilon = 1e-3);
        assert_abs_diff_eq!(c.b, 2.448, epsilon = 1e-3);
        let z = error_ellipse(&[[0.0, 0.0], [0.0, 0.0]], 0.95).unwrap();
        assert_eq!((z.a, z.b), (0.0, 0.0));
        let d = error_ellipse(&[[100.0, 0.0], [0.0, 1.0]], 0.95).unwrap();
        assert_abs_diff_eq!(d.a, 24.48, epsilon = 1e-2);
        assert_abs_diff_eq!(d.b, 2.448, epsilon = 1e-3);
        // first axis is east
        assert_abs_diff_eq!(d.orientation, 90.0, epsilon = 1e-9);
        let n = error_ellipse(&[[1.0, 0.0], [0.0, 100.0]], 0.95).unwrap();
        assert_abs_diff_eq!(n.orientation, 0.0, epsilon = 1e-9);
        assert!(matches!(
            error_ellipse(&[[1.0, 0.0], [0.0, -1.0]], 0.95),
            Err(Error::NegativeVariance(_))
        ));
        assert!(error_ellipse(&[[1.0, 0.0], [0.0, 1.0]], 1.0).is_err());
    }

    #[test]
    fn ellipse_matches_eigendecomposition() {
        let cov = [[40.0, 12.0], [12.0, 9.0]];
        let e = error_ellipse(&cov, 0.99).unwrap();
        let m = nalgebra::Matrix2::<f64>::new(40.0, 12.0, 12.0, 9.0);
        let eig = m.symmetric_eigen();
        let (imax, imin) = if eig.eigenvalues[0] > eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let q = chi2_2dof_quantile(0.99);
        assert_abs_diff_eq!(e.a, (eig.eigenvalues[imax] * q).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(e.b, (eig.eigenvalues[imin] * q).sqrt(), epsilon = 1e-9);
        let v = eig.eigenvectors.column(imax);
        let az = v[0].atan2(v[1]).to_degrees().rem_euclid(180.0);
        assert_abs_diff_eq!(e.orientation, az, epsilon = 1e-9);
    }

    fn scenario() -> (TransmitterState, Pass) {
        let spec = OrbitSpec::overflying(408e3, 51.6, 40.0, 38.0, true, 0.0).unwrap();
        let pass = propagate_circular(&spec, -30.0, 60.0, 20.0).unwrap();
        let pass = Pass::new("p1", pass.states().to_vec()).unwrap();
        let tx = TransmitterState::new(Geodetic::new(35.4, 35.95, 48.0).unwrap()).with_clock_rate("p1", 2.5e-8);
        (tx, pass)
    }

    #[test]
    fn noise_free_capture_equals_prediction() {
        let (tx, pass) = scenario();
        let cap = synthesize_capture(&tx, &pass, &ClockModel::ideal(), 0.0, 1).unwrap();
        for (s, m) in pass.states().iter().zip(&cap.measurements) {
            let p = predict_doppler(&tx.position, 2.5e-8, s, GPS_L1_HZ).unwrap();
            assert_eq!(m.f_d, p);
            assert_eq!(m.sigma, UNIT_WEIGHT_SIGMA);
        }
    }

    #[test]
    fn white_noise_level() {
        let (tx, pass) = scenario();
        let cap = synthesize_capture(&tx, &pass, &ClockModel::ideal(), 2.3, 9).unwrap();
        let diffs: Vec<f64> = pass
            .states()
            .iter()
            .zip(&cap.measurements)
            .map(|(s, m)| m.f_d - predict_doppler(&tx.position, 2.5e-8, s, GPS_L1_HZ).unwrap())
            .collect();
        let st = residual_stats(&diffs);
        assert!((st.std / 2.3 - 1.0).abs() < 0.05, "{}", st.std);
    }

    #[test]
    fn clock_walk_step_size() {
        let (tx, pass) = scenario();
        let model = ClockModel::tcxo();
        let mut sq = 0.0;
        let mut count = 0.0;
        for seed in 0..50 {
            let cap = synthesize_capture(&tx, &pass, &model, 0.0, seed).unwrap();
            let err: Vec<f64> = pass
                .states()
                .iter()
                .zip(&cap.measurements)
                .map(|(s, m)| m.f_d - predict_doppler(&tx.position, 2.5e-8, s, GPS_L1_HZ).unwrap())
                .collect();
            assert_eq!(err[0], 0.0);
            for w in err.windows(2) {
                sq += (w[1] - w[0]).powi(2);
                count += 1.0;
            }
        }
        let expected = GPS_L1_HZ * model.step_variance(0.05).sqrt();
        assert!(((sq / count).sqrt() / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn noise_free_fit_recovers_truth() {
        let (tx, pass) = scenario();
        let cap = synthesize_capture(&tx, &pass, &ClockModel::ideal(), 0.0, 1).unwrap();
        let prior = AltitudePrior { altitude: 48.0, sigma: 5.0 };
        let sol = estimate(&[cap], Some(prior), Some(tx.position), GPS_L1_HZ, &EstimatorOptions::default()).unwrap();
        let (de, dn) = horizontal_offset(&tx.position, &sol.transmitter.position);
        assert!(de.hypot(dn) < 0.1);
        assert!((sol.transmitter.position.altitude - 48.0).abs() < 0.1);
        assert!((sol.transmitter.clock_rate("p1") - 2.5e-8).abs() < 1e-13);
        let stats = postfit_residual_stats(&sol);
        assert!(stats[0].1.std < 1e-6);
        assert!(sol.converged);
    }

    #[test]
    fn grid_initialization_finds_transmitter() {
        let (tx, pass) = scenario();
        let cap = synthesize_capture(&tx, &pass, &ClockModel::ideal(), 2.3, 4).unwrap();
        let prior = AltitudePrior { altitude: 48.0, sigma: 5.0 };
        let sol = estimate(&[cap], Some(prior), None, GPS_L1_HZ, &EstimatorOptions::default()).unwrap();
        let (de, dn) = horizontal_offset(&tx.position, &sol.transmitter.position);
        assert!(de.hypot(dn) < 3.0 * sol.ellipse99.a, "{de} {dn}");
    }

    #[test]
    fn empty_input_rejected() {
        assert!(estimate(&[], None, None, GPS_L1_HZ, &EstimatorOptions::default()).is_err());
    }

    #[test]
    fn capture_files_round_trip() {
        let tx = TransmitterState::new(Geodetic::new(35.4, 35.95, 48.0).unwrap());
        let spec = OrbitSpec::overflying(408e3, 51.6, 34.0, 40.0, true, 30.0).unwrap();
        let pass = Pass::new("p1", propagate_circular(&spec, 0.0, 5.0, 20.0).unwrap().states().to_vec()).unwrap();
        let cap = synthesize_capture(&tx, &pass, &ClockModel::tcxo(), 2.3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sidecar = cap.save(dir.path(), "p1").unwrap();
        let back = load_capture(&sidecar).unwrap();
        assert_eq!(back, cap);
    }

    #[test]
    fn malformed_capture_reports_line() {
        let spec = OrbitSpec::overflying(408e3, 51.6, 34.0, 40.0, true, 30.0).unwrap();
        let pass = propagate_circular(&spec, 0.0, 0.1, 20.0).unwrap();
        let text = "t,f_d_hz,sigma_hz\n0,1.0,2.3\n0.05,oops,2.3\n";
        match read_capture(text.as_bytes(), pass) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
