use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Stage};
use crate::calibration::{CalibrationConfig, Objective};
use crate::dataset::Format;
use crate::predict::{ParamBound, ParamMap, PredictorKind, VelocityEstimator};
use crate::preprocess::PreprocessConfig;
use crate::scenario::ScenarioSpec;
use crate::synthetic::{LinearCrowdConfig, SyntheticConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Top-level experiment configuration, read from YAML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the configuration file.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetSource>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub experiment: Experiment,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default)]
    pub name: Option<String>,
    /// File on disk, relative to the configuration file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Guessed from the extension when absent.
    #[serde(default)]
    pub format: Option<Format>,
    /// Generated instead of loaded.
    #[serde(default)]
    pub synthetic: Option<SyntheticSource>,
}

impl DatasetSource {
    pub fn label(&self, index: usize) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        if let Some(p) = &self.path {
            if let Some(stem) = p.file_stem() {
                return stem.to_string_lossy().into_owned();
            }
        }
        match &self.synthetic {
            Some(s) => format!("{}{index}", s.kind_name()),
            None => format!("dataset{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticSource {
    Chasing(SyntheticConfig),
    Opposing(SyntheticConfig),
    Crossing(SyntheticConfig),
    LinearCrowd(LinearCrowdConfig),
    ArcCrowd(ArcCrowdSource),
}

/// Crowd settings plus a turn rate in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcCrowdSource {
    pub turn_rate: f64,
    #[serde(default)]
    pub agents: Option<usize>,
    #[serde(default)]
    pub frames: Option<usize>,
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    #[serde(default)]
    pub extent: Option<f64>,
    #[serde(default)]
    pub min_speed: Option<f64>,
    #[serde(default)]
    pub max_speed: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ArcCrowdSource {
    pub fn crowd(&self) -> LinearCrowdConfig {
        let d = LinearCrowdConfig::default();
        LinearCrowdConfig {
            agents: self.agents.unwrap_or(d.agents),
            frames: self.frames.unwrap_or(d.frames),
            frequency_hz: self.frequency_hz.unwrap_or(d.frequency_hz),
            extent: self.extent.unwrap_or(d.extent),
            min_speed: self.min_speed.unwrap_or(d.min_speed),
            max_speed: self.max_speed.unwrap_or(d.max_speed),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

impl SyntheticSource {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SyntheticSource::Chasing(_) => "chasing",
            SyntheticSource::Opposing(_) => "opposing",
            SyntheticSource::Crossing(_) => "crossing",
            SyntheticSource::LinearCrowd(_) => "linear_crowd",
            SyntheticSource::ArcCrowd(_) => "arc_crowd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioPreset {
    #[default]
    Default,
    Eth,
}

/// Preset plus optional per-field overrides, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub preset: ScenarioPreset,
    #[serde(default)]
    pub obs_len: Option<usize>,
    #[serde(default)]
    pub pred_len: Option<usize>,
    #[serde(default)]
    pub min_agents: Option<usize>,
    #[serde(default)]
    pub stride: Option<usize>,
}

impl ScenarioConfig {
    pub fn resolve(&self) -> ScenarioSpec {
        let base = match self.preset {
            ScenarioPreset::Default => ScenarioSpec::default(),
            ScenarioPreset::Eth => ScenarioSpec::eth_preset(),
        };
        ScenarioSpec {
            obs_len: self.obs_len.unwrap_or(base.obs_len),
            pred_len: self.pred_len.unwrap_or(base.pred_len),
            min_agents: self.min_agents.unwrap_or(base.min_agents),
            stride: self.stride.unwrap_or(base.stride),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictorChoice {
    #[default]
    Cvm,
    SocialForce,
    Karamouzas,
    External,
}

impl PredictorChoice {
    pub fn builtin(self) -> Option<PredictorKind> {
        match self {
            PredictorChoice::Cvm => Some(PredictorKind::Cvm),
            PredictorChoice::SocialForce => Some(PredictorKind::SocialForce),
            PredictorChoice::Karamouzas => Some(PredictorKind::Karamouzas),
            PredictorChoice::External => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    #[serde(default)]
    pub kind: PredictorChoice,
    /// Shell command of an external predictor.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub params: ParamMap,
    /// Flat YAML map of calibrated parameters; entries in `params` take precedence.
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub velocity: VelocityEstimator,
    /// Per-request limit for external predictors.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_timeout() -> f64 {
    10.0
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: PredictorChoice::Cvm,
            command: None,
            params: ParamMap::new(),
            params_file: None,
            velocity: VelocityEstimator::default(),
            timeout_s: default_timeout(),
        }
    }
}

impl PredictorConfig {
    /// Parses a command-line selection: a built-in name or `external:<command>`.
    pub fn select(&mut self, selection: &str) -> Result<(), HarnessError> {
        if let Some(cmd) = selection.strip_prefix("external:") {
            let cmd = cmd.trim();
            if cmd.is_empty() {
                return Err(HarnessError::config("external predictor needs a command"));
            }
            self.kind = PredictorChoice::External;
            self.command = Some(cmd.to_string());
        } else {
            let kind: PredictorKind = selection
                .parse()
                .map_err(|e: crate::predict::PredictError| HarnessError::config(e.to_string()))?;
            if Some(kind) != self.kind.builtin() {
                self.params.clear();
                self.params_file = None;
            }
            self.kind = match kind {
                PredictorKind::Cvm => PredictorChoice::Cvm,
                PredictorKind::SocialForce => PredictorChoice::SocialForce,
                PredictorKind::Karamouzas => PredictorChoice::Karamouzas,
            };
            self.command = None;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Search seed; the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_refine")]
    pub refine_fraction: f64,
    #[serde(default)]
    pub objective: Objective,
    /// Objective horizon, s.
    #[serde(default = "default_objective_horizon")]
    pub horizon_s: f64,
    /// Leading share of each dataset used for calibration.
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Replaces the predictor's default search space.
    #[serde(default)]
    pub bounds: Option<Vec<ParamBound>>,
}

fn default_budget() -> usize {
    200
}
fn default_refine() -> f64 {
    0.3
}
fn default_objective_horizon() -> f64 {
    4.8
}
fn default_fraction() -> f64 {
    0.3
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            seed: None,
            refine_fraction: default_refine(),
            objective: Objective::Fde,
            horizon_s: default_objective_horizon(),
            fraction: default_fraction(),
            bounds: None,
        }
    }
}

impl CalibrationSection {
    pub fn search_config(&self, run_seed: u64, horizon: usize) -> CalibrationConfig {
        CalibrationConfig {
            budget: self.budget,
            seed: self.seed.unwrap_or(run_seed),
            refine_fraction: self.refine_fraction,
            objective: self.objective,
            horizon: Some(horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Experiment {
    #[default]
    Single,
    HorizonSweep {
        #[serde(default = "default_horizons")]
        horizons_s: Vec<f64>,
    },
    ObservationSweep { observations_s: Vec<f64> },
    NoiseSweep {
        #[serde(default = "default_sigmas")]
        sigmas: Vec<f64>,
    },
    Transfer,
    Runtime {
        #[serde(default = "default_warmup")]
        warmup: usize,
    },
    CrowdBreakdown,
}

fn default_horizons() -> Vec<f64> {
    vec![1.6, 3.2, 4.8, 8.0]
}
fn default_sigmas() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.4]
}
fn default_warmup() -> usize {
    3
}


impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Single => "single",
            Experiment::HorizonSweep { .. } => "horizon_sweep",
            Experiment::ObservationSweep { .. } => "observation_sweep",
            Experiment::NoiseSweep { .. } => "noise_sweep",
            Experiment::Transfer => "transfer",
            Experiment::Runtime { .. } => "runtime",
            Experiment::CrowdBreakdown => "crowd_breakdown",
        }
    }
}

/// A parsed configuration together with the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }
}

pub fn parse_config(text: &str, base_dir: impl Into<PathBuf>) -> Result<LoadedConfig, HarnessError> {
    let config: ExperimentConfig =
        serde_yaml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
    let loaded = LoadedConfig {
        config,
        base_dir: base_dir.into(),
    };
    loaded.validate()?;
    Ok(loaded)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::new(Stage::Config, format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, base).map_err(|e| HarnessError::new(Stage::Config, format!("{}: {}", path.display(), e.message)))
}

impl LoadedConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let c = &self.config;
        let bad = |m: String| Err(HarnessError::config(m));
        if c.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", c.version));
        }
        if c.datasets.is_empty() {
            return bad("at least one dataset is required".into());
        }
        for (i, d) in c.datasets.iter().enumerate() {
            match (&d.path, &d.synthetic) {
                (Some(p), None) => {
                    let full = self.resolve(p);
                    if !full.exists() {
                        return bad(format!("dataset file {} does not exist", full.display()));
                    }
                }
                (None, Some(_)) => {
                    if d.format.is_some() {
                        return bad(format!("dataset {i}: format only applies to files"));
                    }
                }
                _ => return bad(format!("dataset {i}: exactly one of path or synthetic is required")),
            }
        }
        let mut names: Vec<String> = c.datasets.iter().enumerate().map(|(i, d)| d.label(i)).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique; set 'name' to disambiguate".into());
        }
        c.preprocess.validate().map_err(|e| HarnessError::config(e.to_string()))?;
        c.scenario
            .resolve()
            .validate()
            .map_err(|e| HarnessError::config(e.to_string()))?;
        let p = &c.predictor;
        match p.kind {
            PredictorChoice::External => {
                if p.command.as_deref().is_none_or(|s| s.trim().is_empty()) {
                    return bad("external predictor needs a command".into());
                }
                if !p.params.is_empty() || p.params_file.is_some() {
                    return bad("external predictors take no params".into());
                }
            }
            _ => {
                if p.command.is_some() {
                    return bad("command only applies to external predictors".into());
                }
            }
        }
        if !(p.timeout_s > 0.0 && p.timeout_s.is_finite()) {
            return bad(format!("timeout_s must be > 0, got {}", p.timeout_s));
        }
        if let Some(f) = &p.params_file {
            let full = self.resolve(f);
            if !full.exists() {
                return bad(format!("params file {} does not exist", full.display()));
            }
        }
        p.velocity.validate().map_err(|e| HarnessError::config(e.to_string()))?;
        let cal = &c.calibration;
        if cal.budget == 0 {
            return bad("calibration budget must be at least 1".into());
        }
        if !(cal.fraction > 0.0 && cal.fraction < 1.0) {
            return bad(format!("calibration fraction must lie in (0, 1), got {}", cal.fraction));
        }
        if !(cal.horizon_s > 0.0) {
            return bad("calibration horizon_s must be > 0".into());
        }
        let positive = |what: &str, values: &[f64], allow_zero: bool| -> Result<(), HarnessError> {
            if values.is_empty() {
                return bad(format!("{what} must not be empty"));
            }
            for v in values {
                let ok = v.is_finite() && (*v > 0.0 || (allow_zero && *v == 0.0));
                if !ok {
                    return bad(format!("{what} contains invalid value {v}"));
                }
            }
            Ok(())
        };
        match &c.experiment {
            Experiment::HorizonSweep { horizons_s } => positive("horizons_s", horizons_s, false)?,
            Experiment::ObservationSweep { observations_s } => positive("observations_s", observations_s, false)?,
            Experiment::NoiseSweep { sigmas } => positive("sigmas", sigmas, true)?,
            Experiment::Transfer => {
                if c.datasets.len() < 2 {
                    return bad("transfer needs at least two datasets".into());
                }
                if p.kind == PredictorChoice::External {
                    return bad("transfer calibrates parameters, which external predictors lack".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON rendering of the configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(&self.config).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "version: 1\ndatasets:\n  - synthetic: {kind: linear_crowd, agents: 3}\n";

    #[test]
    fn minimal_config_defaults() {
        let c = parse_config(MINIMAL, ".").unwrap().config;
        assert_eq!(c.experiment, Experiment::Single);
        assert_eq!(c.scenario.resolve(), ScenarioSpec::default());
        assert_eq!(c.predictor.kind, PredictorChoice::Cvm);
        assert_eq!(c.calibration.budget, 200);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}experimnet: {{kind: single}}\n");
        assert!(parse_config(&text, ".").is_err());
        let text = format!("{MINIMAL}experiment: {{kind: noise_sweep, sigma: [0.1]}}\n");
        assert!(parse_config(&text, ".").is_err());
    }

    #[test]
    fn unknown_synthetic_fields_rejected() {
        let text = "version: 1\ndatasets:\n  - synthetic: {kind: crossing, episodes: 3, bogus: 1}\n";
        assert!(parse_config(text, ".").is_err());
        let text = "version: 1\ndatasets:\n  - synthetic: {kind: crossing, episodes: 3}\n";
        assert!(parse_config(text, ".").is_ok());
    }

    #[test]
    fn version_and_sweeps_checked() {
        assert!(parse_config(&MINIMAL.replace("version: 1", "version: 2"), ".").is_err());
        let text = format!("{MINIMAL}experiment: {{kind: horizon_sweep, horizons_s: []}}\n");
        assert!(parse_config(&text, ".").is_err());
        let text = format!("{MINIMAL}experiment: {{kind: noise_sweep, sigmas: [0.1, -0.1]}}\n");
        assert!(parse_config(&text, ".").is_err());
        let text = format!("{MINIMAL}experiment: {{kind: horizon_sweep}}\n");
        let c = parse_config(&text, ".").unwrap().config;
        assert_eq!(c.experiment, Experiment::HorizonSweep { horizons_s: default_horizons() });
    }

    #[test]
    fn eth_preset_with_override() {
        let text = format!("{MINIMAL}scenario: {{preset: eth, stride: 10}}\n");
        let spec = parse_config(&text, ".").unwrap().config.scenario.resolve();
        assert_eq!((spec.obs_len, spec.pred_len, spec.stride), (6, 10, 10));
    }

    #[test]
    fn missing_dataset_file() {
        let text = "version: 1\ndatasets:\n  - path: /nonexistent/file.csv\n";
        let err = parse_config(text, ".").unwrap_err();
        assert_eq!(err.stage, Stage::Config);
    }

    #[test]
    fn predictor_selection() {
        let mut p = PredictorConfig::default();
        p.select("external:python3 adapter.py").unwrap();
        assert_eq!(p.kind, PredictorChoice::External);
        assert_eq!(p.command.as_deref(), Some("python3 adapter.py"));
        p.select("sof").unwrap();
        assert_eq!(p.kind, PredictorChoice::SocialForce);
        assert!(p.select("lstm").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse_config(MINIMAL, ".").unwrap();
        let b = parse_config(&format!("{MINIMAL}seed: 0\n"), ".").unwrap();
        let c = parse_config(&format!("{MINIMAL}seed: 1\n"), ".").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
