//! Monte Carlo study of clock-instability-driven geolocation error.
//!
//! Each trial synthesizes captures over a fixed reconstructed geometry,
//! re-estimates the transmitter and records the horizontal error. Trials are
//! seeded by splitting a master seed, so results do not depend on thread
//! scheduling.

use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clocks::ClockModel;
use crate::error::{Error, Result};
use crate::geodesy::{geocentric_latitude, spherical_destination};
use crate::geolocate::{
    error_ellipse, estimate, horizontal_offset, synthesize_capture, AltitudePrior, ErrorEllipse, EstimatorOptions,
    GeolocationSolution, PassCapture, TransmitterState,
};
use crate::orbits::{propagate_circular, OrbitSpec, Pass};
use crate::Geodetic;

/// One capture placed relative to the transmitter: the sub-receiver point at
/// mid-capture lies `ground_distance` meters from the transmitter along
/// `bearing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassGeometry {
    pub label: String,
    pub ascending: bool,
    /// m.
    pub ground_distance: f64,
    /// Degrees east of north, from the transmitter.
    pub bearing: f64,
    /// m.
    pub altitude: f64,
    /// Degrees.
    pub inclination: f64,
    /// s.
    pub duration: f64,
    /// Hz.
    pub rate: f64,
    /// White Doppler noise sigma, Hz. Also the weight used by the estimator.
    pub w_sigma: f64,
    /// Constant transmitter clock rate during this capture, s/s.
    pub clock_rate: f64,
}

impl PassGeometry {
    pub fn new(label: impl Into<String>, ascending: bool, ground_distance: f64, bearing: f64) -> Self {
        Self {
            label: label.into(),
            ascending,
            ground_distance,
            bearing,
            altitude: 408e3,
            inclination: 51.6,
            duration: 60.0,
            rate: 20.0,
            w_sigma: 2.3,
            clock_rate: 0.0,
        }
    }

    pub fn orbit(&self, target: &Geodetic) -> Result<OrbitSpec> {
        let (lat, lon) = spherical_destination(target.latitude, target.longitude, self.bearing, self.ground_distance);
        OrbitSpec::overflying(
            self.altitude,
            self.inclination,
            geocentric_latitude(lat),
            lon,
            self.ascending,
            0.0,
        )
    }

    /// Receiver states over `[-duration / 2, duration / 2]` around the reference epoch.
    pub fn build(&self, target: &Geodetic) -> Result<Pass> {
        if !(self.w_sigma > 0.0) {
            return Err(Error::invalid(format!("pass {}: w_sigma must be positive", self.label)));
        }
        let spec = self.orbit(target)?;
        let pass = propagate_circular(&spec, -0.5 * self.duration, self.duration, self.rate)?;
        Pass::new(self.label.clone(), pass.states().to_vec())
    }
}

/// Transmitter plus the captures that observe it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub transmitter: Geodetic,
    pub passes: Vec<PassGeometry>,
}

impl Scenario {
    /// Emitter on the Syrian coast used throughout the examples.
    pub fn emitter() -> Geodetic {
        Geodetic {
            latitude: 35.4,
            longitude: 35.95,
            altitude: 48.0,
        }
    }

    /// Single 60 s capture reconstructed so the receiver stays 9 to 13.5
    /// degrees above the transmitter's horizon.
    pub fn day144() -> Self {
        Self {
            transmitter: Self::emitter(),
            passes: vec![PassGeometry::new("day144", true, 1_300e3, 90.0)],
        }
    }

    /// Three captures on non-repeating ground tracks, with per-capture noise
    /// levels of 2.3 to 2.5 Hz.
    pub fn three_pass() -> Self {
        let mut day074 = PassGeometry::new("day074", true, 700e3, 270.0);
        day074.w_sigma = 2.3;
        let mut day144 = PassGeometry::new("day144", true, 1_300e3, 90.0);
        day144.w_sigma = 2.4;
        let mut day151 = PassGeometry::new("day151", false, 1_200e3, 30.0);
        day151.w_sigma = 2.5;
        Self {
            transmitter: Self::emitter(),
            passes: vec![day074, day144, day151],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "day144" => Some(Self::day144()),
            "three_pass" => Some(Self::three_pass()),
            _ => None,
        }
    }

    pub fn build_passes(&self) -> Result<Vec<Pass>> {
        if self.passes.is_empty() {
            return Err(Error::invalid("scenario has no passes"));
        }
        self.passes.iter().map(|p| p.build(&self.transmitter)).collect()
    }

    pub fn transmitter_state(&self) -> TransmitterState {
        let mut tx = TransmitterState::new(self.transmitter);
        for p in &self.passes {
            tx.clock_rate_per_pass.insert(p.label.clone(), p.clock_rate);
        }
        tx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub scenario: Scenario,
    pub clock_model: ClockModel,
    pub trials: usize,
    pub subgroup_size: usize,
    pub subgroup_draws: usize,
    pub seed: u64,
    /// Add white Doppler noise at each pass's `w_sigma`. Off for the clock
    /// study, which isolates the transmitter oscillator's contribution.
    pub white_noise: bool,
    pub altitude_prior: Option<AltitudePrior>,
}

impl McConfig {
    pub fn new(scenario: Scenario, clock_model: ClockModel, seed: u64) -> Self {
        let altitude = scenario.transmitter.altitude;
        Self {
            scenario,
            clock_model,
            trials: 1000,
            subgroup_size: 250,
            subgroup_draws: 100_000,
            seed,
            white_noise: false,
            altitude_prior: Some(AltitudePrior { altitude, sigma: 5.0 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trials >= self.subgroup_size && self.subgroup_size >= 2) {
            return Err(Error::invalid("need trials >= subgroup_size >= 2"));
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Horizontal error of the estimate, m.
    pub east: f64,
    pub north: f64,
    /// Formal 95% ellipse reported by the estimator.
    pub formal95: ErrorEllipse,
    /// Post-fit residual standard deviation over all captures, Hz.
    pub residual_std: f64,
}

impl TrialOutcome {
    /// Whether the true position lies inside the formal 95% ellipse.
    pub fn inside_formal95(&self) -> bool {
        let e = &self.formal95;
        if e.a == 0.0 || e.b == 0.0 {
            return false;
        }
        let theta = e.orientation.to_radians();
        let (ua, ub) = ((theta.sin(), theta.cos()), (theta.cos(), -theta.sin()));
        let pa = self.east * ua.0 + self.north * ua.1;
        let pb = self.east * ub.0 + self.north * ub.1;
        (pa / e.a).powi(2) + (pb / e.b).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub trials: Vec<TrialOutcome>,
    /// 95% ellipse of the sample covariance of the horizontal errors.
    pub empirical_ellipse95: ErrorEllipse,
    /// Mean of the formal 95% axes over all trials.
    pub mean_formal_a95: f64,
    pub mean_formal_b95: f64,
    pub mean_error: [f64; 2],
    /// Mid-capture ground-track azimuth of the first pass, degrees.
    pub ground_track_azimuth: f64,
}

impl McResult {
    pub fn errors(&self) -> Vec<[f64; 2]> {
        self.trials.iter().map(|t| [t.east, t.north]).collect()
    }

    pub fn fraction_inside_formal95(&self) -> f64 {
        let n = self.trials.iter().filter(|t| t.inside_formal95()).count();
        n as f64 / self.trials.len() as f64
    }

    /// Angle in [0, 90] degrees between the empirical minor axis and the
    /// ground track.
    pub fn minor_axis_misalignment(&self) -> f64 {
        axis_misalignment(self.empirical_ellipse95.orientation + 90.0, self.ground_track_azimuth)
    }
}

/// Smallest angle between two undirected axes given as azimuths, degrees.
pub fn axis_misalignment(axis: f64, direction: f64) -> f64 {
    let d = (axis - direction).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Sample covariance (n - 1 normalization) of 2-D points.
pub fn sample_covariance(points: &[[f64; 2]]) -> Result<[[f64; 2]; 2]> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let (me, mn) = mean2(points);
    let (mut see, mut snn, mut sen) = (0.0, 0.0, 0.0);
    for p in points {
        let (de, dn) = (p[0] - me, p[1] - mn);
        see += de * de;
        snn += dn * dn;
        sen += de * dn;
    }
    let k = (n - 1) as f64;
    Ok([[see / k, sen / k], [sen / k, snn / k]])
}

fn mean2(points: &[[f64; 2]]) -> (f64, f64) {
    let n = points.len() as f64;
    let (se, sn) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p[0], a.1 + p[1]));
    (se / n, sn / n)
}

/// Confidence ellipse from the sample covariance of horizontal errors.
pub fn empirical_ellipse(points: &[[f64; 2]], confidence: f64) -> Result<ErrorEllipse> {
    error_ellipse(&sample_covariance(points)?, confidence)
}

/// 95% ellipse of the per-trial error differences between two studies run
/// with the same seeds and trial count.
///
/// Clock synthesis consumes the generator identically for every h₋₂, so the
/// white-noise draws cancel and the difference isolates the clock term.
pub fn paired_difference(with: &McResult, without: &McResult) -> Result<ErrorEllipse> {
    if with.trials.len() != without.trials.len() {
        return Err(Error::invalid("paired studies must have equal trial counts"));
    }
    let diffs: Vec<[f64; 2]> = with
        .trials
        .iter()
        .zip(&without.trials)
        .map(|(a, b)| [a.east - b.east, a.north - b.north])
        .collect();
    empirical_ellipse(&diffs, 0.95)
}

/// Independent per-trial seed stream derived from a master seed.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

fn run_trial(
    cfg: &McConfig,
    passes: &[Pass],
    tx: &TransmitterState,
    opts: &EstimatorOptions,
    i: usize,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.seed, i as u64);
    let captures = passes
        .iter()
        .zip(&cfg.scenario.passes)
        .map(|(pass, geom)| {
            let w = if cfg.white_noise { geom.w_sigma } else { 0.0 };
            synthesize_capture(tx, pass, &cfg.clock_model, w, rng.next_u64())?.with_sigma(geom.w_sigma)
        })
        .collect::<Result<Vec<PassCapture>>>()?;
    let sol = estimate(&captures, cfg.altitude_prior, Some(tx.position), tx.frequency, opts)?;
    Ok(outcome(&sol, &tx.position))
}

fn outcome(sol: &GeolocationSolution, truth: &Geodetic) -> TrialOutcome {
    let (east, north) = horizontal_offset(truth, &sol.transmitter.position);
    let all: Vec<f64> = sol.postfit_residuals.iter().flat_map(|p| p.residuals.iter().copied()).collect();
    TrialOutcome {
        east,
        north,
        formal95: sol.ellipse95,
        residual_std: crate::geolocate::residual_stats(&all).std,
    }
}

/// Runs `cfg.trials` independent trials in parallel.
///
/// The estimator starts from the true position: the study measures the
/// spread of the converged solution, not the initialization search.
pub fn run_clock_study(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let passes = cfg.scenario.build_passes()?;
    let tx = cfg.scenario.transmitter_state();
    let opts = EstimatorOptions::default();
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            run_trial(cfg, &passes, &tx, &opts, i).map_err(|e| Error::Trial {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<[f64; 2]> = trials.iter().map(|t| [t.east, t.north]).collect();
    let n = trials.len() as f64;
    let (me, mn) = mean2(&errors);
    Ok(McResult {
        empirical_ellipse95: empirical_ellipse(&errors, 0.95)?,
        mean_formal_a95: trials.iter().map(|t| t.formal95.a).sum::<f64>() / n,
        mean_formal_b95: trials.iter().map(|t| t.formal95.b).sum::<f64>() / n,
        mean_error: [me, mn],
        ground_track_azimuth: passes[0].ground_track_azimuth()?,
        trials,
    })
}

/// Distribution of subgroup ellipse deviations from the full population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupStats {
    pub draws: usize,
    pub subgroup_size: usize,
    /// (confidence, |a_sub / a_pop - 1|) pairs.
    pub a_quantiles: Vec<(f64, f64)>,
    /// (confidence, |b_sub / b_pop - 1|) pairs.
    pub b_quantiles: Vec<(f64, f64)>,
    pub max_a_deviation: f64,
    pub max_b_deviation: f64,
}

impl SubgroupStats {
    pub fn a_quantile(&self, confidence: f64) -> Option<f64> {
        lookup(&self.a_quantiles, confidence)
    }

    pub fn b_quantile(&self, confidence: f64) -> Option<f64> {
        lookup(&self.b_quantiles, confidence)
    }
}

fn lookup(q: &[(f64, f64)], confidence: f64) -> Option<f64> {
    q.iter().find(|(c, _)| (c - confidence).abs() < 1e-12).map(|(_, v)| *v)
}

/// Reported subgroup quantile levels.
pub const SUBGROUP_LEVELS: [f64; 5] = [0.5, 0.9, 0.95, 0.99, 0.999];

const DRAWS_PER_CHUNK: usize = 1000;

/// Draws random subsets (without replacement) of the trial errors and
/// compares each subset's 95% ellipse axes with the full population's.
pub fn subgroup_analysis(result: &McResult, cfg: &McConfig) -> Result<SubgroupStats> {
    cfg.validate()?;
    let errors = result.errors();
    if errors.len() < cfg.trials {
        return Err(Error::InsufficientData {
            needed: cfg.trials,
            got: errors.len(),
        });
    }
    let pop = empirical_ellipse(&errors, 0.95)?;
    if pop.a == 0.0 || pop.b == 0.0 {
        return Err(Error::invalid("population ellipse is degenerate"));
    }
    let size = cfg.subgroup_size;
    let chunks = cfg.subgroup_draws.div_ceil(DRAWS_PER_CHUNK);
    // subgroup streams sit after the trial streams
    let base = cfg.trials as u64;
    let devs: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(cfg.seed, base + c as u64);
            let count = DRAWS_PER_CHUNK.min(cfg.subgroup_draws - c * DRAWS_PER_CHUNK);
            let mut buf = vec![[0.0; 2]; size];
            (0..count)
                .map(|_| {
                    let idx = index::sample(&mut rng, errors.len(), size);
                    for (slot, i) in buf.iter_mut().zip(idx.iter()) {
                        *slot = errors[i];
                    }
                    let e = empirical_ellipse(&buf, 0.95)?;
                    Ok(((e.a / pop.a - 1.0).abs(), (e.b / pop.b - 1.0).abs()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut a: Vec<f64> = devs.iter().map(|d| d.0).collect();
    let mut b: Vec<f64> = devs.iter().map(|d| d.1).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let q = |v: &[f64]| SUBGROUP_LEVELS.iter().map(|&c| (c, empirical_quantile(v, c))).collect();
    Ok(SubgroupStats {
        draws: devs.len(),
        subgroup_size: size,
        a_quantiles: q(&a),
        b_quantiles: q(&b),
        max_a_deviation: a.last().copied().unwrap_or(0.0),
        max_b_deviation: b.last().copied().unwrap_or(0.0),
    })
}

/// Smallest sample value with at least `p` of the sample at or below it.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// One row of the per-clock-class summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockTableRow {
    pub clock: String,
    pub h_minus2: f64,
    /// Empirical 95% semi-major axis, m.
    pub a: f64,
    /// Empirical 95% semi-minor axis, m.
    pub b: f64,
}

/// Runs the clock study once per model with a shared base configuration.
pub fn clock_table(base: &McConfig, models: &[ClockModel]) -> Result<Vec<(ClockTableRow, McResult)>> {
    models
        .iter()
        .map(|m| {
            let cfg = McConfig {
                clock_model: m.clone(),
                ..base.clone()
            };
            let r = run_clock_study(&cfg)?;
            let row = ClockTableRow {
                clock: m.label.clone(),
                h_minus2: m.h_minus2,
                a: r.empirical_ellipse95.a,
                b: r.empirical_ellipse95.b,
            };
            Ok((row, r))
        })
        .collect()
}
