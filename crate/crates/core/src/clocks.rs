//! Oscillator frequency-error models and stability statistics.
//!
//! Only random-walk frequency modulation (the `h_-2` power-law term) is
//! modeled. A synthesized fractional-frequency series starts at zero and
//! takes independent Gaussian steps of variance `2 pi^2 h_-2 dt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Random-walk FM oscillator model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    /// Coefficient of the f^-2 term of the fractional-frequency spectrum, 1/s.
    pub h_minus2: f64,
    pub label: String,
}

impl ClockModel {
    pub fn new(label: impl Into<String>, h_minus2: f64) -> Result<Self> {
        if !(h_minus2 >= 0.0 && h_minus2.is_finite()) {
            return Err(Error::invalid("h_-2 must be finite and non-negative"));
        }
        Ok(Self {
            h_minus2,
            label: label.into(),
        })
    }

    /// A perfect clock.
    pub fn ideal() -> Self {
        Self {
            h_minus2: 0.0,
            label: "ideal".into(),
        }
    }

    pub fn tcxo() -> Self {
        Self {
            h_minus2: 3e-21,
            label: "TCXO".into(),
        }
    }

    pub fn low_quality_ocxo() -> Self {
        Self {
            h_minus2: 3e-23,
            label: "Low-quality OCXO".into(),
        }
    }

    pub fn ocxo() -> Self {
        Self {
            h_minus2: 3e-25,
            label: "OCXO".into(),
        }
    }

    /// The three clock classes used by the single-pass study, best last.
    pub fn presets() -> [Self; 3] {
        [Self::tcxo(), Self::low_quality_ocxo(), Self::ocxo()]
    }

    /// Looks up a preset by a short name (`tcxo`, `low_ocxo`, `ocxo`, `ideal`).
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "tcxo" => Some(Self::tcxo()),
            "low_ocxo" | "low-ocxo" | "low_quality_ocxo" => Some(Self::low_quality_ocxo()),
            "ocxo" => Some(Self::ocxo()),
            "ideal" | "none" => Some(Self::ideal()),
            _ => None,
        }
    }

    /// Variance of one random-walk step over `dt` seconds.
    pub fn step_variance(&self, dt: f64) -> f64 {
        2.0 * std::f64::consts::PI.powi(2) * self.h_minus2 * dt
    }

    /// Asymptotic Allan variance `(2 pi^2 / 3) h_-2 tau` of random-walk FM.
    pub fn allan_variance(&self, tau: f64) -> f64 {
        2.0 * std::f64::consts::PI.powi(2) / 3.0 * self.h_minus2 * tau
    }
}

/// Uniformly sampled fractional frequency errors (s/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries<T> {
    pub dt: T,
    pub values: Vec<T>,
}

impl<T: Real> FrequencySeries<T> {
    pub fn new(dt: T, values: Vec<T>) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::invalid("sampling interval must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frequency values must be finite"));
        }
        Ok(Self { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Synthesizes `n` samples of random-walk FM from a seed.
pub fn synthesize_random_walk<T>(model: &ClockModel, dt: T, n: usize, seed: u64) -> Result<FrequencySeries<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_walk_with(&mut rng, model, dt, n)
}

/// Same as [`synthesize_random_walk`] but drawing from a caller-owned generator.
pub fn random_walk_with<T, R>(rng: &mut R, model: &ClockModel, dt: T, n: usize) -> Result<FrequencySeries<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    if n == 0 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    if !(dt > T::zero()) {
        return Err(Error::invalid("sampling interval must be positive"));
    }
    // one standard normal per step regardless of h-2, so runs that differ
    // only in clock quality consume the generator identically
    let sigma = T::lit(model.step_variance(dt.as_f64()).sqrt());
    let mut values = Vec::with_capacity(n);
    let mut y = T::zero();
    values.push(y);
    for _ in 1..n {
        let z: T = StandardNormal.sample(rng);
        y = y + sigma * z;
        values.push(y);
    }
    Ok(FrequencySeries { dt, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    /// Two-sample deviation with dead time (T > tau).
    TwoSampleDeadTime,
    /// Zero-dead-time two-sample (Allan) deviation.
    Allan,
}

/// A two-sample frequency stability figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityMeasure<T> {
    pub sigma_y: T,
    /// Averaging interval, s.
    pub tau: T,
    /// Interval between the starts of the two averages, s.
    pub sampling_interval: T,
    pub kind: StabilityKind,
}

impl<T: Real> StabilityMeasure<T> {
    pub fn two_sample(sigma_y: T, sampling_interval: T, tau: T) -> Result<Self> {
        if !(sigma_y >= T::zero() && tau > T::zero() && sampling_interval >= tau) {
            return Err(Error::invalid("need sigma_y >= 0 and T >= tau > 0"));
        }
        Ok(Self {
            sigma_y,
            tau,
            sampling_interval,
            kind: StabilityKind::TwoSampleDeadTime,
        })
    }
}

/// Non-overlapping Allan deviation at averaging time `tau`.
pub fn allan_deviation<T: Real>(series: &FrequencySeries<T>, tau: T) -> Result<StabilityMeasure<T>> {
    let ratio = (tau / series.dt).as_f64();
    let m = ratio.round();
    if !(m >= 1.0) || (ratio - m).abs() > 1e-9 * m.max(1.0) {
        return Err(Error::invalid("tau must be a positive integer multiple of dt"));
    }
    let m = m as usize;
    if series.len() < 3 * m {
        return Err(Error::InsufficientData {
            needed: 3 * m,
            got: series.len(),
        });
    }
    let mt = T::lit(m as f64);
    let averages: Vec<T> = series
        .values
        .chunks_exact(m)
        .map(|c| c.iter().fold(T::zero(), |acc, &v| acc + v) / mt)
        .collect();
    let diffs = averages.len() - 1;
    let sum_sq = averages
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1] - w[0]) * (w[1] - w[0]));
    let var = sum_sq / T::lit(2.0 * diffs as f64);
    Ok(StabilityMeasure {
        sigma_y: var.sqrt(),
        tau,
        sampling_interval: tau,
        kind: StabilityKind::Allan,
    })
}

/// Barnes bias function B2(r, mu): the ratio of the two-sample variance with
/// dead time (`r = T / tau`) to the Allan variance, for a power law with
/// Allan variance proportional to tau^mu.
///
/// Valid for -1 <= mu < 2; mu = 0 uses the logarithmic limit.
pub fn b2_bias<T: Real>(r: T, mu: T) -> Result<T> {
    if !(r >= T::one()) || !r.is_finite() {
        return Err(Error::invalid("B2 needs r = T/tau >= 1"));
    }
    if !(mu >= -T::one() && mu < T::lit(2.0)) {
        return Err(Error::UnsupportedExponent(mu.as_f64()));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    if mu.abs() < T::lit(1e-12) {
        let g = |x: T| if x > T::zero() { x * x * x.ln() } else { T::zero() };
        let num = g(r + one) + g(r - one) - two * g(r);
        return Ok(num / (four * two.ln()));
    }
    // Second difference of |t|^(mu+2); written so large r keeps precision
    // for the integer exponents.
    let p = mu + two;
    let num = if (mu - one).abs() < T::lit(1e-12) {
        T::lit(6.0) * r - two
    } else if (mu + one).abs() < T::lit(1e-12) {
        -two
    } else {
        (r + one).powf(p) + (r - one).abs().powf(p) - two * r.powf(p) - two
    };
    Ok(num / (four * (two.powf(mu) - one)))
}

/// Converts a two-sample deviation with dead time into an Allan deviation
/// at the same tau.
pub fn two_sample_to_allan<T: Real>(m: &StabilityMeasure<T>, mu: T) -> Result<StabilityMeasure<T>> {
    if m.kind != StabilityKind::TwoSampleDeadTime {
        return Err(Error::invalid("input must be a dead-time two-sample measure"));
    }
    let b2 = b2_bias(m.sampling_interval / m.tau, mu)?;
    Ok(StabilityMeasure {
        sigma_y: m.sigma_y / b2.sqrt(),
        tau: m.tau,
        sampling_interval: m.tau,
        kind: StabilityKind::Allan,
    })
}
