//! Interference power bookkeeping and jamming-efficiency figures.
//!
//! Arithmetic runs in linear units; decibels appear only at the boundaries.
//! Interference is modeled as multi-access noise whose density after the
//! receiver's matched filter is `I0 = (2/3) P_I T_C` for a matched-spectrum
//! (sinc^2-shaped) emission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn to_db<T: Real>(linear: T) -> T {
    T::lit(10.0) * linear.log10()
}

pub fn from_db<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Ratio of post-correlation interference density to received interference
/// power, per unit chip interval, for a matched-spectrum emission.
fn matched_density_factor<T: Real>() -> T {
    T::lit(2.0) / T::lit(3.0)
}

/// Received interference power (dBW) implied by a CINR drop of `drop_db`,
/// assuming the carrier power is unchanged and CINR ~ C / (N0 + I0).
///
/// A zero drop maps to negative infinity (no interference).
pub fn interference_power_from_cinr_drop<T: Real>(drop_db: T, n0_dbw_hz: T, chip_interval_s: T) -> Result<T> {
    if !(drop_db >= T::zero()) || !drop_db.is_finite() {
        return Err(Error::invalid("CINR drop must be finite and non-negative"));
    }
    if !(chip_interval_s > T::zero()) {
        return Err(Error::invalid("chip interval must be positive"));
    }
    let n0 = from_db(n0_dbw_hz);
    let i0 = n0 * (from_db(drop_db) - T::one());
    let p_i = i0 / (matched_density_factor::<T>() * chip_interval_s);
    Ok(to_db(p_i))
}

/// Forward model: the CINR drop (dB) caused by received interference power `p_i_dbw`.
pub fn cinr_drop_from_interference<T: Real>(p_i_dbw: T, n0_dbw_hz: T, chip_interval_s: T) -> T {
    let n0 = from_db(n0_dbw_hz);
    let i0 = matched_density_factor::<T>() * from_db(p_i_dbw) * chip_interval_s;
    to_db((n0 + i0) / n0)
}

/// Transmitted power toward the receiver, `P_S = P_I - G_r + L`, in dBW and watts.
pub fn transmit_power<T: Real>(p_i_dbw: T, g_r_db: T, path_loss_db: T) -> (T, T) {
    let p_s = p_i_dbw - g_r_db + path_loss_db;
    (p_s, from_db(p_s))
}

/// Jamming-to-authentic power ratio (dB) a matched-spectrum jammer needs to
/// push CINR down to the acquisition threshold `eta_dbhz`.
pub fn matched_jamming_ratio<T: Real>(eta_dbhz: T, chip_interval_s: T) -> T {
    -(eta_dbhz + to_db(matched_density_factor::<T>() * chip_interval_s))
}

/// Power advantage of power-matched spoofing (0 dB needed) over
/// matched-spectrum jamming, as a linear factor.
pub fn spoofing_efficiency_factor<T: Real>(eta_dbhz: T, chip_interval_s: T) -> T {
    from_db(matched_jamming_ratio(eta_dbhz, chip_interval_s))
}

/// Potency advantage (dB) of a matched-spectrum jammer over a flat jammer
/// spreading the same power across `span_multiple / T_C` Hz. The chip
/// interval cancels.
pub fn matched_vs_flat_advantage<T: Real>(span_multiple: T) -> Result<T> {
    if !(span_multiple > T::zero()) {
        return Err(Error::invalid("span multiple must be positive"));
    }
    Ok(to_db(matched_density_factor::<T>() * span_multiple))
}

/// Attenuation (dB) of a binary-code signal when the central `lobes` of its
/// sinc^2 spectrum are excised: 1 is the main lobe alone, 3 adds the adjacent
/// side lobe on each side, and so on. Zero removes nothing.
pub fn excision_attenuation_db<T: Real>(lobes: u32) -> Result<T> {
    if lobes == 0 {
        return Ok(T::zero());
    }
    if lobes.is_multiple_of(2) {
        return Err(Error::UnsupportedConfiguration(format!(
            "{lobes} lobes cannot be excised symmetrically"
        )));
    }
    // band edge in units of 1/T_C (null-to-null)
    let edge = lobes.div_ceil(2);
    // 16 starting panels per lobe keep the adaptive rule from accepting a
    // coarse estimate whose error happens to cancel
    let panels = 16 * edge;
    let width = T::one() / T::lit(16.0);
    let tol = T::lit(1e-9) / T::lit(panels as f64);
    let mut half = T::zero();
    for k in 0..panels {
        let a = T::lit(k as f64) * width;
        half = half + adaptive_simpson(&sinc_sq::<T>, a, a + width, tol);
    }
    let remaining = T::one() - T::lit(2.0) * half;
    Ok(-to_db(remaining))
}

/// sinc^2 with sinc(x) = sin(pi x) / (pi x); integrates to one over the line.
fn sinc_sq<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        return T::one();
    }
    let px = T::PI() * x;
    let s = px.sin() / px;
    s * s
}

fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}

/// Inputs and results of an interference link budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget<T> {
    /// Thermal noise density, dBW/Hz.
    pub n0_dbw_hz: T,
    /// Spreading chip interval, s.
    pub chip_interval_s: T,
    /// Receiver antenna gain toward the emitter, dB.
    pub g_r_db: T,
    /// Path loss, dB.
    pub path_loss_db: T,
    /// Received interference power, dBW.
    pub p_i_dbw: T,
    /// Transmitted power toward the receiver, dBW.
    pub p_s_dbw: T,
    /// Effective interference density, dBW/Hz.
    pub i0_dbw_hz: T,
}

impl<T: Real> LinkBudget<T> {
    /// Infers the budget from an observed CINR drop.
    pub fn from_cinr_drop(drop_db: T, n0_dbw_hz: T, chip_interval_s: T, g_r_db: T, path_loss_db: T) -> Result<Self> {
        let p_i_dbw = interference_power_from_cinr_drop(drop_db, n0_dbw_hz, chip_interval_s)?;
        let (p_s_dbw, _) = transmit_power(p_i_dbw, g_r_db, path_loss_db);
        let i0_dbw_hz = p_i_dbw + to_db(matched_density_factor::<T>() * chip_interval_s);
        Ok(Self {
            n0_dbw_hz,
            chip_interval_s,
            g_r_db,
            path_loss_db,
            p_i_dbw,
            p_s_dbw,
            i0_dbw_hz,
        })
    }

    pub fn p_s_watts(&self) -> T {
        from_db(self.p_s_dbw)
    }
}

/// Emission styles compared by the efficiency figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerStyle {
    MatchedSpectrum,
    Flat4OverTc,
    SpoofPowerMatched,
}

/// Jammer scenario: receiver cold-start acquisition threshold and style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerSpec<T> {
    /// Cold-start acquisition threshold, dB-Hz.
    pub eta: T,
    pub style: JammerStyle,
}

impl<T: Real> JammerSpec<T> {
    /// Jamming-to-authentic power ratio (dB) this style needs to deny cold start.
    pub fn required_ratio_db(&self, chip_interval_s: T) -> Result<T> {
        match self.style {
            JammerStyle::MatchedSpectrum => Ok(matched_jamming_ratio(self.eta, chip_interval_s)),
            JammerStyle::Flat4OverTc => {
                let adv = matched_vs_flat_advantage(T::lit(4.0))?;
                Ok(matched_jamming_ratio(self.eta, chip_interval_s) + adv)
            }
            JammerStyle::SpoofPowerMatched => Ok(T::zero()),
        }
    }
}
