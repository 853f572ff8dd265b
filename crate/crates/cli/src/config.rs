//! Schema-versioned JSON run configurations and `--set` overrides.

use std::path::{Path, PathBuf};

use leoint::clocks::ClockModel;
use leoint::consts::{GPS_CA_CHIP_S, GPS_L1_HZ};
use leoint::geolocate::{AltitudePrior, EstimatorOptions};
use leoint::montecarlo::Scenario;
use leoint::survey::synth::{Emitter, SurveyScenario};
use leoint::survey::BinningSpec;
use leoint::Geodetic;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// Default master seed for every seeded command.
pub const DEFAULT_SEED: u64 = 20_180_524;

/// A named preset or an inline scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Preset(String),
    Inline(Scenario),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<Scenario, Failure> {
        match self {
            Self::Preset(name) => {
                Scenario::preset(name).ok_or_else(|| Failure::config(format!("unknown scenario preset {name:?}")))
            }
            Self::Inline(s) => Ok(s.clone()),
        }
    }
}

/// A named clock preset (`tcxo`, `low_ocxo`, `ocxo`, `ideal`) or an inline model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClockRef {
    Preset(String),
    Inline(ClockModel),
}

impl ClockRef {
    pub fn resolve(&self) -> Result<ClockModel, Failure> {
        match self {
            Self::Preset(name) => {
                ClockModel::preset(name).ok_or_else(|| Failure::config(format!("unknown clock preset {name:?}")))
            }
            Self::Inline(m) => ClockModel::new(m.label.clone(), m.h_minus2).map_err(Failure::from),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: ScenarioRef,
    pub clock: ClockRef,
    /// Add white Doppler noise at each pass's `w_sigma`.
    pub white_noise: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            scenario: ScenarioRef::Preset("day144".into()),
            clock: ClockRef::Preset("tcxo".into()),
            white_noise: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub schema_version: u32,
    /// Capture sidecar JSON files.
    pub captures: Vec<PathBuf>,
    /// Carrier frequency, Hz.
    pub frequency: f64,
    pub altitude_prior: Option<AltitudePrior>,
    /// Initial guess; a grid search runs when absent.
    pub init: Option<Geodetic>,
    pub options: EstimatorOptions,
    /// Known position, used only to report the solution error.
    pub truth: Option<Geodetic>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            captures: Vec::new(),
            frequency: GPS_L1_HZ,
            altitude_prior: None,
            init: None,
            options: EstimatorOptions::default(),
            truth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgroupConfig {
    pub size: usize,
    pub draws: usize,
}

impl Default for SubgroupConfig {
    fn default() -> Self {
        Self { size: 250, draws: 100_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: ScenarioRef,
    pub clocks: Vec<ClockRef>,
    pub trials: usize,
    pub white_noise: bool,
    pub altitude_prior: Option<AltitudePrior>,
    /// Subgroup resampling of the first clock's trials.
    pub subgroup: Option<SubgroupConfig>,
    /// Also run an ideal-clock study on the same seeds and report the
    /// per-trial difference for each clock.
    pub paired_baseline: bool,
    /// Write per-trial errors for each clock.
    pub dump_trials: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            scenario: ScenarioRef::Preset("day144".into()),
            clocks: ["tcxo", "low_ocxo", "ocxo"]
                .into_iter()
                .map(|s| ClockRef::Preset(s.into()))
                .collect(),
            trials: 1000,
            white_noise: false,
            altitude_prior: Some(AltitudePrior {
                altitude: Scenario::emitter().altitude,
                sigma: 5.0,
            }),
            subgroup: Some(SubgroupConfig::default()),
            paired_baseline: false,
            dump_trials: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Observables CSV files. Mutually exclusive with `synthetic`.
    pub observables: Vec<PathBuf>,
    /// Absent from a config file means no synthetic scenario.
    #[serde(default)]
    pub synthetic: Option<SurveyScenario>,
    /// Persisted control grid to reuse instead of building one.
    pub control_grid: Option<PathBuf>,
    pub binning: BinningSpec,
    /// Detection window, s.
    pub window: f64,
    /// Hotspot cell size, degrees.
    pub cell_size: f64,
    /// Write the synthetic observables alongside the results.
    pub write_observables: bool,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            observables: Vec::new(),
            synthetic: Some(SurveyScenario {
                emitters: vec![Emitter::new(Scenario::emitter(), 6.0)],
                duration: 10.0 * 86_400.0,
                ..SurveyScenario::default()
            }),
            control_grid: None,
            binning: BinningSpec::default(),
            window: 1.0,
            cell_size: 1.0,
            write_observables: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetConfig {
    pub schema_version: u32,
    /// Observed CINR drop, dB.
    pub cinr_drop_db: f64,
    pub n0_dbw_hz: f64,
    pub g_r_db: f64,
    /// Emitter to receiver distance, m.
    pub range_m: f64,
    pub frequency_hz: f64,
    pub chip_interval_s: f64,
    /// Overrides the free-space loss computed from range and frequency.
    pub path_loss_db: Option<f64>,
    /// Cold-start acquisition threshold, dB-Hz.
    pub eta_dbhz: f64,
    /// Flat jammer bandwidth in units of 1 / T_C.
    pub flat_span_multiple: f64,
    /// Central spectral lobes removed by excision.
    pub excision_lobes: u32,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            cinr_drop_db: 6.0,
            n0_dbw_hz: -204.0,
            g_r_db: 3.0,
            range_m: 1340e3,
            frequency_hz: GPS_L1_HZ,
            chip_interval_s: GPS_CA_CHIP_S,
            path_loss_db: None,
            eta_dbhz: 30.0,
            flat_span_multiple: 4.0,
            excision_lobes: 3,
        }
    }
}

/// Loaded configuration plus the directory relative paths resolve against.
pub struct Loaded<T> {
    pub config: T,
    pub base_dir: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Reads `path` (or starts from defaults), applies overrides in order and
/// checks the schema version.
pub fn load<T>(path: Option<&Path>, overrides: &[String]) -> Result<Loaded<T>, Failure>
where
    T: Default + Serialize + DeserializeOwned,
{
    let (mut value, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::config(format!("{}: invalid JSON: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, dir)
        }
        None => (
            serde_json::to_value(T::default()).map_err(|e| Failure::config(e.to_string()))?,
            PathBuf::new(),
        ),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(Failure::config(format!("unsupported schema_version {v}"))),
        None => return Err(Failure::config("config is missing schema_version")),
    }
    let config = serde_json::from_value(value).map_err(|e| Failure::config(format!("invalid config: {e}")))?;
    Ok(Loaded { config, base_dir })
}

/// Applies `a.b.c=value`. The value is parsed as JSON and taken as a plain
/// string when that fails. Missing intermediate objects are created.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("override {spec:?} is not key=value")))?;
    if key.is_empty() {
        return Err(Failure::config(format!("override {spec:?} has an empty key")));
    }
    let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), new);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Failure::config(format!("{key}: {part:?} is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Failure::config(format!("{key}: index {idx} out of range ({len})")))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Failure::config(format!("{key}: cannot descend into a scalar at {part:?}"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_set_nested_values() {
        let mut v = json!({"a": {"b": 1}, "list": [1, 2]});
        apply_override(&mut v, "a.b=2.5").unwrap();
        apply_override(&mut v, "a.c=text").unwrap();
        apply_override(&mut v, "list.1=7").unwrap();
        apply_override(&mut v, "d.e=true").unwrap();
        assert_eq!(v, json!({"a": {"b": 2.5, "c": "text"}, "list": [1, 7], "d": {"e": true}}));
    }

    #[test]
    fn bad_overrides_rejected() {
        let mut v = json!({"a": 1});
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "a.b=1").is_err());
        assert!(apply_override(&mut v, "=1").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let l: Loaded<MonteCarloConfig> = load(None, &["trials=10".into()]).unwrap();
        assert_eq!(l.config.trials, 10);
        let l: Loaded<SurveyConfig> = load(None, &[]).unwrap();
        assert!(l.config.synthetic.is_some());
    }

    #[test]
    fn partial_file_takes_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("survey.json");
        std::fs::write(&path, r#"{"schema_version": 1, "observables": ["obs.csv"]}"#).unwrap();
        let loaded = load::<SurveyConfig>(Some(&path), &[]).unwrap();
        assert!(loaded.config.synthetic.is_none());
        assert_eq!(loaded.config.window, 1.0);
    }

    #[test]
    fn schema_version_enforced() {
        let e = load::<LinkBudgetConfig>(None, &["schema_version=2".into()]).err().unwrap();
        assert_eq!(e.code, 2);
    }
}
