//! Synthetic interaction fixtures and generated datasets.
//!
//! The three two-agent fixtures (chasing, opposing, crossing) move at constant speed along
//! straight lines; their ground truth is the straight continuation, so any deviation of a
//! prediction is caused by the interaction model alone.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AgentId, Dataset, DatasetError, Detection};
use crate::preprocess::{inject_noise, PreprocessError};
use crate::rng::keyed_rng;
use crate::scenario::{extract_scenarios, Scenario, ScenarioError, ScenarioSpec};
use crate::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error("unknown synthetic scenario '{0}' (expected chasing, opposing or crossing)")]
    UnknownKind(String),
    #[error("invalid synthetic configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Chasing,
    Opposing,
    Crossing,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [SyntheticKind::Chasing, SyntheticKind::Opposing, SyntheticKind::Crossing];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Chasing => "chasing",
            SyntheticKind::Opposing => "opposing",
            SyntheticKind::Crossing => "crossing",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = SyntheticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SyntheticError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub obs_len: usize,
    pub pred_len: usize,
    pub frequency_hz: f64,
    /// m/s
    pub speed: f64,
    /// Lateral offset of the opposing agent, m.
    pub y_offset: f64,
    /// Distance between follower and leader when chasing, m.
    pub gap: f64,
    /// Independent copies, placed one after another in time.
    pub episodes: usize,
    /// Per-axis position noise added to every detection.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            obs_len: 8,
            pred_len: 12,
            frequency_hz: 2.5,
            speed: 1.0,
            y_offset: 0.2,
            gap: 1.0,
            episodes: 1,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::Invalid(m.to_string()));
        if self.obs_len < 2 {
            return bad("obs_len must be at least 2");
        }
        if self.pred_len == 0 {
            return bad("pred_len must be at least 1");
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad("frequency_hz must be > 0");
        }
        if !(self.speed.is_finite() && self.y_offset.is_finite() && self.gap.is_finite()) {
            return bad("speed, y_offset and gap must be finite");
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        Ok(())
    }

    fn spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            obs_len: self.obs_len,
            pred_len: self.pred_len,
            min_agents: 2,
            stride: 1,
        }
    }
}

/// Position of both agents at frame `k` of an episode (`k = obs_len - 1` is the anchor).
fn fixture_positions(kind: SyntheticKind, cfg: &SyntheticConfig, k: usize) -> [Vec2; 2] {
    let step = cfg.speed / cfg.frequency_hz;
    let rel = k as f64 - cfg.obs_len as f64;
    match kind {
        SyntheticKind::Opposing => [Vec2::new(rel * step, 0.0), Vec2::new(-rel * step, cfg.y_offset)],
        SyntheticKind::Chasing => [Vec2::new(rel * step, 0.0), Vec2::new(rel * step + cfg.gap, 0.0)],
        SyntheticKind::Crossing => {
            let meet = (cfg.obs_len - 1 + cfg.pred_len.div_ceil(2)) as f64;
            let s = (k as f64 - meet) * step;
            [Vec2::new(s, 0.0), Vec2::new(0.0, s)]
        }
    }
}

/// Fixture as a dataset: per episode two agents tracked for `obs_len + pred_len` frames.
pub fn synthetic_dataset(kind: SyntheticKind, cfg: &SyntheticConfig) -> Result<Dataset, SyntheticError> {
    cfg.validate()?;
    let len = cfg.obs_len + cfg.pred_len;
    let period = len + cfg.obs_len;
    let dt = 1.0 / cfg.frequency_hz;
    let mut detections = Vec::with_capacity(cfg.episodes * len * 2);
    for e in 0..cfg.episodes {
        for k in 0..len {
            let frame = (e * period + k) as i64;
            for (a, position) in fixture_positions(kind, cfg, k).into_iter().enumerate() {
                detections.push(Detection {
                    frame,
                    time: frame as f64 * dt,
                    agent: AgentId((2 * e + a + 1) as i64),
                    position,
                });
            }
        }
    }
    let mut ds = Dataset::from_detections(kind.name(), detections, Some(cfg.frequency_hz), None)?;
    if cfg.noise_sigma > 0.0 {
        ds.tracks = ds
            .tracks
            .iter()
            .map(|t| inject_noise(t, cfg.noise_sigma, cfg.seed))
            .collect::<Result<_, _>>()?;
    }
    Ok(ds)
}

/// Scenarios of the fixture, one per episode.
pub fn synthetic_scenarios(kind: SyntheticKind, cfg: &SyntheticConfig) -> Result<Vec<Scenario>, SyntheticError> {
    let ds = synthetic_dataset(kind, cfg)?;
    Ok(extract_scenarios(&ds, &cfg.spec())?)
}

/// The single noise-free scenario of the fixture.
pub fn generate_synthetic(kind: SyntheticKind, cfg: &SyntheticConfig) -> Result<Scenario, SyntheticError> {
    let cfg = SyntheticConfig {
        episodes: 1,
        ..cfg.clone()
    };
    let mut s = synthetic_scenarios(kind, &cfg)?;
    debug_assert_eq!(s.len(), 1);
    Ok(s.remove(0))
}

/// Agents walking straight lines at constant, randomly drawn velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearCrowdConfig {
    pub agents: usize,
    pub frames: usize,
    pub frequency_hz: f64,
    /// Start positions are drawn from `[-extent, extent]^2`.
    pub extent: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub seed: u64,
}

impl Default for LinearCrowdConfig {
    fn default() -> Self {
        Self {
            agents: 5,
            frames: 80,
            frequency_hz: 2.5,
            extent: 10.0,
            min_speed: 0.5,
            max_speed: 1.8,
            seed: 0,
        }
    }
}

pub fn linear_crowd(cfg: &LinearCrowdConfig) -> Result<Dataset, SyntheticError> {
    crowd(cfg, 0.0, "linear_crowd")
}

/// Like [`linear_crowd`] but every agent turns at `turn_rate` rad/s, tracing a circular arc.
pub fn arc_crowd(cfg: &LinearCrowdConfig, turn_rate: f64) -> Result<Dataset, SyntheticError> {
    if !(turn_rate.is_finite() && turn_rate != 0.0) {
        return Err(SyntheticError::Invalid("turn_rate must be finite and non-zero".into()));
    }
    crowd(cfg, turn_rate, "arc_crowd")
}

fn crowd(cfg: &LinearCrowdConfig, turn_rate: f64, name: &str) -> Result<Dataset, SyntheticError> {
    if cfg.agents == 0 || cfg.frames == 0 {
        return Err(SyntheticError::Invalid("agents and frames must be at least 1".into()));
    }
    if !(cfg.min_speed >= 0.0 && cfg.max_speed >= cfg.min_speed && cfg.extent > 0.0) {
        return Err(SyntheticError::Invalid("speed range or extent out of order".into()));
    }
    let dt = 1.0 / cfg.frequency_hz;
    let mut detections = Vec::with_capacity(cfg.agents * cfg.frames);
    for a in 0..cfg.agents {
        let mut rng = keyed_rng(&[cfg.seed, a as u64]);
        let start = Vec2::new(
            rng.random_range(-cfg.extent..=cfg.extent),
            rng.random_range(-cfg.extent..=cfg.extent),
        );
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(cfg.min_speed..=cfg.max_speed);
        let v = Vec2::new(heading.cos(), heading.sin()) * speed;
        for f in 0..cfg.frames {
            let t = f as f64 * dt;
            let position = if turn_rate == 0.0 {
                start + v * t
            } else {
                // circle through `start` with initial velocity `v`
                let radius = speed / turn_rate;
                let normal = Vec2::new(-heading.sin(), heading.cos());
                let center = start + normal * radius;
                let angle = heading - std::f64::consts::FRAC_PI_2 + turn_rate * t;
                center + Vec2::new(angle.cos(), angle.sin()) * radius
            };
            detections.push(Detection {
                frame: f as i64,
                time: t,
                agent: AgentId(a as i64),
                position,
            });
        }
    }
    Ok(Dataset::from_detections(name, detections, Some(cfg.frequency_hz), None)?)
}
