//! Testing-scenario extraction.
//!
//! A scenario is anchored at a frame. Every agent seen in all `obs_len` frames ending at
//! the anchor takes part; agents that are also seen in all `pred_len` following frames
//! are targets and get scored, the rest only provide context to the predictor.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{AgentId, Dataset, EnvironmentModel};
use crate::Vec2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("observation length must be at least 2 frames, got {0}")]
    ObservationTooShort(usize),
    #[error("prediction length must be at least 1 frame")]
    EmptyHorizon,
    #[error("min_agents must be at least 1")]
    ZeroMinAgents,
    #[error("stride must be at least 1 frame")]
    ZeroStride,
    #[error("{what} of {seconds} s is not a whole number of frames at {hz} Hz")]
    FractionalFrames { what: &'static str, seconds: f64, hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Observed frames per agent, including the anchor frame.
    pub obs_len: usize,
    /// Future frames to predict.
    pub pred_len: usize,
    pub min_agents: usize,
    /// Frames between consecutive anchors.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for ScenarioSpec {
    /// 3.2 s observed, 4.8 s predicted at 2.5 Hz, at least two people.
    fn default() -> Self {
        Self {
            obs_len: 8,
            pred_len: 12,
            min_agents: 2,
            stride: 1,
        }
    }
}

impl ScenarioSpec {
    /// 2.4 s observed, 4.0 s predicted at 2.5 Hz.
    pub fn eth_preset() -> Self {
        Self {
            obs_len: 6,
            pred_len: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.obs_len < 2 {
            return Err(ScenarioError::ObservationTooShort(self.obs_len));
        }
        if self.pred_len == 0 {
            return Err(ScenarioError::EmptyHorizon);
        }
        if self.min_agents == 0 {
            return Err(ScenarioError::ZeroMinAgents);
        }
        if self.stride == 0 {
            return Err(ScenarioError::ZeroStride);
        }
        Ok(())
    }

    /// Converts durations to frames, rounding to the nearest frame with a warning.
    pub fn from_seconds(
        obs_seconds: f64,
        pred_seconds: f64,
        hz: f64,
        min_agents: usize,
        stride: usize,
    ) -> Result<Self, ScenarioError> {
        let spec = Self {
            obs_len: seconds_to_frames_rounded("observation horizon", obs_seconds, hz),
            pred_len: seconds_to_frames_rounded("prediction horizon", pred_seconds, hz),
            min_agents,
            stride,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn obs_seconds(&self, hz: f64) -> f64 {
        self.obs_len as f64 / hz
    }

    pub fn pred_seconds(&self, hz: f64) -> f64 {
        self.pred_len as f64 / hz
    }
}

fn seconds_to_frames_rounded(what: &str, seconds: f64, hz: f64) -> usize {
    let exact = seconds * hz;
    let frames = exact.round().max(0.0);
    if (exact - frames).abs() > 1e-6 {
        log::warn!("{what} of {seconds} s is {exact} frames at {hz} Hz; using {frames}");
    }
    frames as usize
}

/// Converts a duration to frames, failing unless it is a whole number of frames.
pub fn seconds_to_frames_exact(what: &'static str, seconds: f64, hz: f64) -> Result<usize, ScenarioError> {
    let exact = seconds * hz;
    let frames = exact.round();
    if (exact - frames).abs() > 1e-6 || frames < 0.0 {
        return Err(ScenarioError::FractionalFrames { what, seconds, hz });
    }
    Ok(frames as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAgent {
    pub id: AgentId,
    /// Oldest first; the last entry is the position at the anchor frame.
    pub observed: Vec<Vec2>,
    /// Ground truth for the following frames; empty for context agents.
    pub future: Vec<Vec2>,
    pub is_target: bool,
}

impl ScenarioAgent {
    pub fn last_observed(&self) -> Vec2 {
        *self.observed.last().expect("observation window is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Frame index of the last observation.
    pub anchor: i64,
    /// Seconds between frames.
    pub dt: f64,
    pub pred_len: usize,
    /// Sorted by agent id.
    pub agents: Vec<ScenarioAgent>,
    pub environment: Option<Arc<EnvironmentModel>>,
}

impl Scenario {
    pub fn obs_len(&self) -> usize {
        self.agents.first().map_or(0, |a| a.observed.len())
    }

    pub fn targets(&self) -> impl Iterator<Item = &ScenarioAgent> {
        self.agents.iter().filter(|a| a.is_target)
    }

    pub fn target_count(&self) -> usize {
        self.targets().count()
    }

    pub fn agent(&self, id: AgentId) -> Option<&ScenarioAgent> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// Keeps the first `pred_len` future frames. Targets stay targets.
    pub fn with_horizon(&self, pred_len: usize) -> Scenario {
        let mut s = self.clone();
        s.pred_len = pred_len;
        for a in &mut s.agents {
            a.future.truncate(pred_len);
        }
        s
    }

    /// Keeps the last `obs_len` observed frames.
    pub fn with_observation(&self, obs_len: usize) -> Scenario {
        let mut s = self.clone();
        for a in &mut s.agents {
            let skip = a.observed.len().saturating_sub(obs_len);
            a.observed.drain(..skip);
        }
        s
    }

    /// Frame index of observation `k` (0 = oldest).
    pub fn observed_frame(&self, k: usize) -> i64 {
        self.anchor - self.obs_len() as i64 + 1 + k as i64
    }
}

/// All scenarios of a uniformly sampled dataset, ordered by anchor.
///
/// Anchors lie on the grid `first_frame + obs_len - 1 + n * stride`.
pub fn extract_scenarios(dataset: &Dataset, spec: &ScenarioSpec) -> Result<Vec<Scenario>, ScenarioError> {
    spec.validate()?;
    let Some((first_frame, _)) = dataset.frame_range() else {
        return Ok(Vec::new());
    };
    let obs = spec.obs_len as i64;
    let pred = spec.pred_len as i64;
    let stride = spec.stride as i64;
    let grid_start = first_frame + obs - 1;
    let env = dataset.environment.clone().map(Arc::new);

    // anchor -> participating agents, built in one pass over each track
    let mut by_anchor: BTreeMap<i64, Vec<ScenarioAgent>> = BTreeMap::new();
    for track in &dataset.tracks {
        let (Some(first), Some(last)) = (track.first_frame(), track.last_frame()) else {
            continue;
        };
        let lowest = first + obs - 1;
        if lowest > last {
            continue;
        }
        // first anchor on the stride grid that is >= lowest
        let offset = (lowest - grid_start).rem_euclid(stride);
        let mut anchor = if offset == 0 { lowest } else { lowest + stride - offset };
        while anchor <= last {
            if let Some(observed) = track.window(anchor - obs + 1, anchor) {
                let future = track.window(anchor + 1, anchor + pred);
                let is_target = future.is_some();
                by_anchor.entry(anchor).or_default().push(ScenarioAgent {
                    id: track.agent,
                    observed,
                    future: future.unwrap_or_default(),
                    is_target,
                });
            }
            anchor += stride;
        }
    }

    let dt = dataset.dt();
    Ok(by_anchor
        .into_iter()
        .filter(|(_, agents)| agents.len() >= spec.min_agents && agents.iter().any(|a| a.is_target))
        .map(|(anchor, mut agents)| {
            agents.sort_by_key(|a| a.id);
            Scenario {
                anchor,
                dt,
                pred_len: spec.pred_len,
                agents,
                environment: env.clone(),
            }
        })
        .collect())
}

/// Number of scenarios per agent count.
pub fn scenario_count_by_crowd(scenarios: &[Scenario]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in scenarios {
        *hist.entry(s.agents.len()).or_insert(0) += 1;
    }
    hist
}
