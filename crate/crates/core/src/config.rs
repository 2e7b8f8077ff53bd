//! JSON scenario files.
//!
//! User-facing quantities carry their unit in the field name (`aoa_deg`,
//! `power_db`, `delay_norm`); everything is converted to radians and linear
//! amplitudes on load. A path is given either by `power_db`, `phase_deg` and a
//! `polarization` of `"H"` or `"V"`, or by explicit complex `weight_h` and
//! `weight_v` pairs `[re, im]`.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::antenna::{ArrayModel, ArraySource, Direction, Element, PatternGrid};
use crate::channel_model::{Path, PathParameterSet, SignalKind};
use crate::cost_ccr::CcrMode;
use crate::estimator::EstimatorKind;
use crate::init::InitMode;
use crate::montecarlo::ScenarioConfig;
use crate::optimizer::LmOptions;
use crate::{Complex64, Error, Result};

/// A number, or a string such as `"1/9"` or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    fn resolve(&self, field: &str) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => {
                let s = s.trim();
                let parsed = match s.split_once('/') {
                    Some((n, d)) => n
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .zip(d.trim().parse::<f64>().ok())
                        .filter(|(_, d)| *d != 0.0)
                        .map(|(n, d)| n / d),
                    None => match s.to_ascii_lowercase().as_str() {
                        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
                        other => other.parse().ok(),
                    },
                };
                parsed.ok_or_else(|| Error::config(field, format!("cannot parse `{s}` as a number")))
            }
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Number::Value(v)
        } else {
            Number::Text(if v > 0.0 { "inf".into() } else { "-inf".into() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub aoa_deg: f64,
    pub eoa_deg: f64,
    pub delay_norm: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_h: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_v: Option<[f64; 2]>,
}

impl PathSpec {
    /// Explicit-weight form of `path`.
    pub fn from_path(path: &Path) -> Self {
        Self {
            aoa_deg: path.direction.azimuth().to_degrees(),
            eoa_deg: path.direction.elevation().to_degrees(),
            delay_norm: Number::Value(path.delay),
            power_db: None,
            phase_deg: None,
            polarization: None,
            weight_h: Some([path.weight_h.re, path.weight_h.im]),
            weight_v: Some([path.weight_v.re, path.weight_v.im]),
        }
    }

    fn resolve(&self, index: usize) -> Result<Path> {
        let field = |name: &str| format!("paths[{index}].{name}");
        let direction = Direction::from_degrees(self.aoa_deg, self.eoa_deg)
            .map_err(|e| Error::config(field("eoa_deg"), e.to_string()))?;
        let delay = self.delay_norm.resolve(&field("delay_norm"))?;
        if !delay.is_finite() {
            return Err(Error::config(field("delay_norm"), "must be finite"));
        }
        let explicit = self.weight_h.is_some() || self.weight_v.is_some();
        let polar = self.power_db.is_some() || self.phase_deg.is_some() || self.polarization.is_some();
        let (weight_h, weight_v) = match (explicit, polar) {
            (true, true) => {
                return Err(Error::config(
                    field("weight_h"),
                    "give either explicit weights or power_db/phase_deg/polarization, not both",
                ))
            }
            (true, false) => {
                let c = |w: Option<[f64; 2]>| w.map_or(Complex64::new(0.0, 0.0), |[re, im]| Complex64::new(re, im));
                (c(self.weight_h), c(self.weight_v))
            }
            (false, _) => {
                let power_db = self.power_db.unwrap_or(0.0);
                let a = Complex64::from_polar(10f64.powf(power_db / 20.0), self.phase_deg.unwrap_or(0.0).to_radians());
                let zero = Complex64::new(0.0, 0.0);
                match self.polarization.as_deref().map(str::to_ascii_uppercase).as_deref() {
                    Some("H") => (a, zero),
                    Some("V") => (zero, a),
                    Some(other) => {
                        return Err(Error::config(field("polarization"), format!("expected \"H\" or \"V\", got `{other}`")))
                    }
                    None => return Err(Error::config(field("polarization"), "missing")),
                }
            }
        };
        Ok(Path {
            direction,
            weight_h,
            weight_v,
            delay,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArraySpec {
    DipoleTriad,
    Elements { elements: Vec<Element> },
    /// Sampled pattern file; relative paths are resolved against the config
    /// file's directory.
    PatternFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Flat,
    RectPulse { duty: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    PerturbedTruth {
        aoa_sigma_deg: f64,
        eoa_sigma_deg: f64,
        delay_sigma: f64,
        weight_sigma: f64,
    },
    CoarseGrid {
        azimuth_step_deg: f64,
        elevation_step_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delay_step: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcrModeSpec {
    TwoStep,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_tolerance: Option<f64>,
}

/// Scenario file as written by the user. `paths`, `samples`, `snr_db`,
/// `trials` and `seed` are required; the rest have defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub paths: Option<Vec<PathSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArraySpec>,
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    pub snr_db: Option<Vec<Number>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccr_mode: Option<CcrModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<LmSpec>,
}

fn required<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::config(field, "missing required field"))
}

impl ConfigFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Resolves and validates every field. `base_dir` anchors relative
    /// pattern file paths.
    pub fn resolve(&self, base_dir: &FsPath) -> Result<ScenarioConfig> {
        let specs = required(&self.paths, "paths")?;
        if specs.is_empty() {
            return Err(Error::config("paths", "at least one path is required"));
        }
        let paths = specs
            .iter()
            .enumerate()
            .map(|(i, s)| s.resolve(i))
            .collect::<Result<Vec<_>>>()?;
        let truth = PathParameterSet::new(paths).map_err(|e| Error::config("paths", e.to_string()))?;

        let array = match self.array.clone().unwrap_or(ArraySpec::DipoleTriad) {
            ArraySpec::DipoleTriad => ArraySource::Analytic(ArrayModel::dipole_triad()),
            ArraySpec::Elements { elements } => ArraySource::Analytic(
                ArrayModel::new(elements).map_err(|e| Error::config("array.elements", e.to_string()))?,
            ),
            ArraySpec::PatternFile { path } => {
                let full = base_dir.join(path);
                let grid = PatternGrid::read_json(&full).map_err(|e| match e {
                    Error::Io { .. } => e,
                    other => Error::config("array.path", other.to_string()),
                })?;
                ArraySource::Grid(grid)
            }
        };

        let signal = match self.signal.clone().unwrap_or(SignalSpec::Flat) {
            SignalSpec::Flat => SignalKind::Flat,
            SignalSpec::RectPulse { duty } => {
                if !(duty > 0.0 && duty <= 1.0) {
                    return Err(Error::config("signal.duty", "must lie in (0, 1]"));
                }
                SignalKind::RectPulse { duty }
            }
        };

        let snr_db = required(&self.snr_db, "snr_db")?
            .iter()
            .enumerate()
            .map(|(i, n)| n.resolve(&format!("snr_db[{i}]")))
            .collect::<Result<Vec<_>>>()?;

        let estimators = match &self.estimators {
            None => vec![EstimatorKind::Ccr, EstimatorKind::Cml],
            Some(names) => {
                let mut kinds = names.iter().map(|n| n.parse()).collect::<Result<Vec<EstimatorKind>>>()?;
                let len = kinds.len();
                kinds.dedup();
                if kinds.len() != len {
                    return Err(Error::config("estimators", "duplicate entries"));
                }
                kinds
            }
        };

        let init = match self.init.clone() {
            None => InitMode::default(),
            Some(InitSpec::PerturbedTruth {
                aoa_sigma_deg,
                eoa_sigma_deg,
                delay_sigma,
                weight_sigma,
            }) => {
                for (name, v) in [
                    ("init.aoa_sigma_deg", aoa_sigma_deg),
                    ("init.eoa_sigma_deg", eoa_sigma_deg),
                    ("init.delay_sigma", delay_sigma),
                    ("init.weight_sigma", weight_sigma),
                ] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::config(name, "must be a finite non-negative number"));
                    }
                }
                InitMode::PerturbedTruth {
                    aoa_sigma_deg,
                    eoa_sigma_deg,
                    delay_sigma,
                    weight_sigma,
                }
            }
            Some(InitSpec::CoarseGrid {
                azimuth_step_deg,
                elevation_step_deg,
                delay_step,
            }) => InitMode::CoarseGrid {
                azimuth_step_deg,
                elevation_step_deg,
                delay_step,
            },
        };

        let d = LmOptions::default();
        let lm = match &self.lm {
            None => d,
            Some(s) => LmOptions {
                max_iterations: s.max_iterations.unwrap_or(d.max_iterations),
                initial_damping: s.initial_damping.unwrap_or(d.initial_damping),
                damping_up: s.damping_up.unwrap_or(d.damping_up),
                damping_down: s.damping_down.unwrap_or(d.damping_down),
                gradient_tolerance: s.gradient_tolerance.unwrap_or(d.gradient_tolerance),
                step_tolerance: s.step_tolerance.unwrap_or(d.step_tolerance),
                cost_tolerance: s.cost_tolerance.unwrap_or(d.cost_tolerance),
            },
        };

        let config = ScenarioConfig {
            truth,
            array,
            bins: required(&self.samples, "samples")?,
            signal,
            snr_db,
            trials: required(&self.trials, "trials")?,
            seed: required(&self.seed, "seed")?,
            estimators,
            init,
            lm,
            ccr_mode: match self.ccr_mode {
                None | Some(CcrModeSpec::TwoStep) => CcrMode::TwoStep,
                Some(CcrModeSpec::Joint) => CcrMode::Joint,
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// The reference three-path scenario.
    pub fn default_scenario() -> Self {
        let path = |aoa: f64, eoa: f64, delay: &str, pol: &str, power: f64| PathSpec {
            aoa_deg: aoa,
            eoa_deg: eoa,
            delay_norm: Number::Text(delay.into()),
            power_db: Some(power),
            phase_deg: Some(0.0),
            polarization: Some(pol.into()),
            weight_h: None,
            weight_v: None,
        };
        let init = InitMode::default();
        let InitMode::PerturbedTruth {
            aoa_sigma_deg,
            eoa_sigma_deg,
            delay_sigma,
            weight_sigma,
        } = init
        else {
            unreachable!("default init is perturbed truth")
        };
        Self {
            paths: Some(vec![
                path(30.0, 35.0, "1/9", "H", 0.0),
                path(150.0, 50.0, "2/9", "H", -2.0),
                path(-45.0, 75.0, "4/9", "V", -3.0),
            ]),
            array: Some(ArraySpec::DipoleTriad),
            samples: Some(128),
            signal: Some(SignalSpec::Flat),
            snr_db: Some((0..=10).map(|i| Number::Value(2.0 * i as f64)).collect()),
            trials: Some(100),
            seed: Some(1),
            estimators: Some(vec!["ccr".into(), "cml".into()]),
            init: Some(InitSpec::PerturbedTruth {
                aoa_sigma_deg,
                eoa_sigma_deg,
                delay_sigma,
                weight_sigma,
            }),
            ccr_mode: Some(CcrModeSpec::TwoStep),
            lm: None,
        }
    }
}

/// Ground truth written next to synthesized observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub samples: usize,
    pub snr_db: Number,
    pub seed: u64,
    pub noise_variance: f64,
    pub paths: Vec<PathSpec>,
}

impl TruthSidecar {
    pub fn new(truth: &PathParameterSet, samples: usize, snr_db: f64, seed: u64, noise_variance: f64) -> Self {
        Self {
            samples,
            snr_db: snr_db.into(),
            seed,
            noise_variance,
            paths: truth.paths().iter().map(PathSpec::from_path).collect(),
        }
    }

    pub fn truth(&self) -> Result<PathParameterSet> {
        let paths = self
            .paths
            .iter()
            .enumerate()
            .map(|(i, s)| s.resolve(i))
            .collect::<Result<Vec<_>>>()?;
        PathParameterSet::new(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::default_truth;

    fn assert_field(r: Result<ScenarioConfig>, want: &str) {
        match r {
            Err(Error::Config { field, .. }) => assert_eq!(field, want),
            other => panic!("expected config error on `{want}`, got {other:?}"),
        }
    }

    #[test]
    fn default_file_resolves_to_reference_truth() {
        let cfg = ConfigFile::default_scenario().resolve(FsPath::new(".")).unwrap();
        let want = default_truth();
        for (a, b) in cfg.truth.paths().iter().zip(want.paths()) {
            assert!((a.direction.azimuth() - b.direction.azimuth()).abs() < 1e-15);
            assert!((a.delay - b.delay).abs() < 1e-15);
            assert!((a.weight_h - b.weight_h).norm() < 1e-15);
            assert!((a.weight_v - b.weight_v).norm() < 1e-15);
        }
        assert_eq!(cfg.bins, 128);
        assert_eq!(cfg.snr_db.len(), 11);
    }

    #[test]
    fn committed_default_matches_builtin() {
        let text = include_str!("../../../docs/default_scenario.json");
        assert_eq!(ConfigFile::from_json_str(text).unwrap(), ConfigFile::default_scenario());
    }

    #[test]
    fn json_round_trip() {
        let file = ConfigFile::default_scenario();
        assert_eq!(ConfigFile::from_json_str(&file.to_json_pretty()).unwrap(), file);
    }

    #[test]
    fn missing_and_invalid_fields_are_named() {
        let mut f = ConfigFile::default_scenario();
        f.trials = None;
        assert_field(f.resolve(FsPath::new(".")), "trials");

        let mut f = ConfigFile::default_scenario();
        f.samples = Some(5);
        assert_field(f.resolve(FsPath::new(".")), "samples");

        let mut f = ConfigFile::default_scenario();
        f.paths.as_mut().unwrap()[1].polarization = Some("X".into());
        assert_field(f.resolve(FsPath::new(".")), "paths[1].polarization");

        let mut f = ConfigFile::default_scenario();
        f.estimators = Some(vec!["music".into()]);
        assert_field(f.resolve(FsPath::new(".")), "estimators");

        let mut f = ConfigFile::default_scenario();
        f.snr_db = Some(vec![Number::Text("loud".into())]);
        assert_field(f.resolve(FsPath::new(".")), "snr_db[0]");

        assert!(matches!(
            ConfigFile::from_json_str(r#"{"trails": 3}"#),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn numbers_accept_fractions_and_infinity() {
        assert_eq!(Number::Text("1/4".into()).resolve("x").unwrap(), 0.25);
        assert_eq!(Number::Text("inf".into()).resolve("x").unwrap(), f64::INFINITY);
        assert_eq!(Number::Text("-3.5".into()).resolve("x").unwrap(), -3.5);
        assert!(Number::Text("1/0".into()).resolve("x").is_err());
        let json: Vec<Number> = serde_json::from_str(r#"[0, "inf", 2.5]"#).unwrap();
        assert_eq!(json[1].resolve("x").unwrap(), f64::INFINITY);
    }

    #[test]
    fn sidecar_round_trips_truth() {
        let t = default_truth();
        let side = TruthSidecar::new(&t, 128, f64::INFINITY, 7, 0.0);
        let text = serde_json::to_string(&side).unwrap();
        let back: TruthSidecar = serde_json::from_str(&text).unwrap();
        assert_eq!(back.truth().unwrap(), t);
        assert_eq!(back.snr_db, Number::Text("inf".into()));
    }
}
