//! Predictors and prediction representations.
//!
//! Built-in methods are the constant-velocity model ([`Cvm`]) and two force models
//! ([`SocialForce`], [`Karamouzas`]). All of them estimate the current velocity of every
//! agent with [`estimate_velocity`] and predict every agent of a scenario, targets and
//! context alike.

mod cvm;
mod force;
mod params;
mod representation;
mod velocity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cvm::{predict_cvm, Cvm};
pub use force::{
    evasive_force, predict_karamouzas, predict_social_force, KaraParams, Karamouzas, SocialForce,
    SofParams,
};
pub use params::{ParamBound, ParamMap, Scale};
pub use representation::{
    AgentPrediction, Gaussian2, GaussianMixtureSequence, Prediction, PredictionError,
    ProbabilityGrid,
};
pub use velocity::{
    estimate_velocity, last_difference_velocity, project_goal, VelocityEstimator, VelocityFilter,
    GOAL_PROJECTION_STEPS,
};

use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("need at least 2 observed positions, got {0}")]
    TooFewObservations(usize),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(#[from] PredictionError),
    #[error("non-finite state for agent {0}")]
    NonFinite(crate::AgentId),
    #[error("external predictor: {0}")]
    External(#[from] crate::bridge::BridgeError),
}

/// Anything that turns a scenario into per-agent predictions.
///
/// `predict` takes `&mut self` so that stateful out-of-process predictors fit the same
/// interface; the built-in predictors hold no state.
pub trait Predictor {
    /// Stable identifier used in reports.
    fn id(&self) -> String;

    fn predict(&mut self, scenario: &Scenario) -> Result<Prediction, PredictError>;
}

/// Built-in predictor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Cvm,
    SocialForce,
    Karamouzas,
}

impl PredictorKind {
    pub fn id(self) -> &'static str {
        match self {
            PredictorKind::Cvm => "cvm",
            PredictorKind::SocialForce => "social_force",
            PredictorKind::Karamouzas => "karamouzas",
        }
    }

    /// Default parameter values as a flat map (empty for CVM).
    pub fn default_params(self) -> ParamMap {
        match self {
            PredictorKind::Cvm => ParamMap::new(),
            PredictorKind::SocialForce => SofParams::default().to_map(),
            PredictorKind::Karamouzas => KaraParams::default().to_map(),
        }
    }

    /// Calibration bounds of the tunable parameters.
    pub fn default_bounds(self) -> Vec<ParamBound> {
        match self {
            PredictorKind::Cvm => Vec::new(),
            PredictorKind::SocialForce => SofParams::bounds(),
            PredictorKind::Karamouzas => KaraParams::bounds(),
        }
    }

    /// Fills `params` up with defaults and validates the result.
    pub fn resolve_params(self, params: &ParamMap) -> Result<ParamMap, PredictError> {
        match self {
            PredictorKind::Cvm => match params.keys().next() {
                Some(key) => Err(PredictError::InvalidParams(format!("cvm takes no parameter '{key}'"))),
                None => Ok(ParamMap::new()),
            },
            PredictorKind::SocialForce => Ok(SofParams::from_map(params)?.to_map()),
            PredictorKind::Karamouzas => Ok(KaraParams::from_map(params)?.to_map()),
        }
    }

    /// Builds a predictor; `params` may be partial, missing keys take their defaults.
    pub fn build(
        self,
        params: &ParamMap,
        velocity: VelocityEstimator,
    ) -> Result<Box<dyn Predictor + Send>, PredictError> {
        Ok(match self {
            PredictorKind::Cvm => {
                if let Some(key) = params.keys().next() {
                    return Err(PredictError::InvalidParams(format!("cvm takes no parameter '{key}'")));
                }
                Box::new(Cvm { velocity })
            }
            PredictorKind::SocialForce => Box::new(SocialForce {
                params: SofParams::from_map(params)?,
                velocity,
            }),
            PredictorKind::Karamouzas => Box::new(Karamouzas {
                params: KaraParams::from_map(params)?,
                velocity,
            }),
        })
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = PredictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cvm" => Ok(PredictorKind::Cvm),
            "social_force" | "sof" => Ok(PredictorKind::SocialForce),
            "karamouzas" | "kara" => Ok(PredictorKind::Karamouzas),
            other => Err(PredictError::InvalidParams(format!("unknown predictor '{other}'"))),
        }
    }
}

/// Point predictions keyed by agent, for callers that only deal with deterministic output.
pub fn points_by_agent(prediction: &Prediction) -> BTreeMap<crate::AgentId, &[crate::Vec2]> {
    prediction
        .agents
        .iter()
        .filter_map(|(id, p)| match p {
            AgentPrediction::Points(points) => Some((*id, points.as_slice())),
            _ => None,
        })
        .collect()
}
