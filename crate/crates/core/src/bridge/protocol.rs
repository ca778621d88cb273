//! Wire format: one JSON object per line, discriminated by `"type"`.

use serde::{Deserialize, Serialize};

use crate::predict::{
    AgentPrediction, Gaussian2, GaussianMixtureSequence, Prediction, PredictionError, ProbabilityGrid,
};
use crate::scenario::Scenario;
use crate::{AgentId, Mat2, Vec2};

pub const PROTOCOL_VERSION: u32 = 1;

pub type WirePoint = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        capabilities: Vec<String>,
    },
    Predict {
        id: u64,
        scenario: WireScenario,
    },
    Prediction {
        id: u64,
        agents: Vec<WireAgentPrediction>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
    Shutdown,
}

impl Message {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Predict { .. } => "predict",
            Message::Prediction { .. } => "prediction",
            Message::Error { .. } => "error",
            Message::Shutdown => "shutdown",
        }
    }
}

/// What the adapter sees of a scenario: observations only, never the future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireScenario {
    pub anchor: i64,
    pub dt: f64,
    pub obs_len: usize,
    pub pred_len: usize,
    pub agents: Vec<WireAgent>,
    #[serde(default)]
    pub goals: Vec<WirePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireAgent {
    pub id: i64,
    pub observed: Vec<WirePoint>,
    pub is_target: bool,
}

impl WireScenario {
    pub fn from_scenario(s: &Scenario) -> Self {
        let env = s.environment.as_deref();
        Self {
            anchor: s.anchor,
            dt: s.dt,
            obs_len: s.obs_len(),
            pred_len: s.pred_len,
            agents: s
                .agents
                .iter()
                .map(|a| WireAgent {
                    id: a.id.0,
                    observed: a.observed.iter().map(|p| [p.x, p.y]).collect(),
                    is_target: a.is_target,
                })
                .collect(),
            goals: env.map(|e| e.goals.iter().map(|g| [g.x, g.y]).collect()).unwrap_or_default(),
            map: env
                .and_then(|e| e.grid_path.as_ref())
                .map(|p| p.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireAgentPrediction {
    pub agent: i64,
    #[serde(flatten)]
    pub prediction: WirePrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WirePrediction {
    Points(Vec<WirePoint>),
    /// `[k][t]`
    Samples(Vec<Vec<WirePoint>>),
    Mixture(WireMixture),
    Grid(Vec<WireGrid>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMixture {
    pub weights: Vec<f64>,
    /// `[k][t]`
    pub means: Vec<Vec<WirePoint>>,
    /// `[k][t]`, row-major 2x2.
    pub covariances: Vec<Vec<[[f64; 2]; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireGrid {
    pub origin: WirePoint,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major from the lowest row.
    pub mass: Vec<f64>,
}

fn pt(p: &WirePoint) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn wire(p: &Vec2) -> WirePoint {
    [p.x, p.y]
}

impl WirePrediction {
    pub fn into_prediction(self) -> Result<AgentPrediction, PredictionError> {
        Ok(match self {
            WirePrediction::Points(p) => AgentPrediction::Points(p.iter().map(pt).collect()),
            WirePrediction::Samples(s) => {
                AgentPrediction::Samples(s.iter().map(|t| t.iter().map(pt).collect()).collect())
            }
            WirePrediction::Mixture(m) => {
                if m.means.len() != m.covariances.len() {
                    return Err(PredictionError::Length {
                        expected: m.means.len(),
                        got: m.covariances.len(),
                    });
                }
                let mut modes = Vec::with_capacity(m.means.len());
                for (means, covs) in m.means.iter().zip(&m.covariances) {
                    if means.len() != covs.len() {
                        return Err(PredictionError::Length {
                            expected: means.len(),
                            got: covs.len(),
                        });
                    }
                    let mode = means
                        .iter()
                        .zip(covs)
                        .map(|(mu, c)| Gaussian2::new(pt(mu), Mat2::new(c[0][0], c[0][1], c[1][0], c[1][1])))
                        .collect::<Result<Vec<_>, _>>()?;
                    modes.push(mode);
                }
                AgentPrediction::Mixture(GaussianMixtureSequence {
                    weights: m.weights,
                    modes,
                })
            }
            WirePrediction::Grid(g) => AgentPrediction::Grid(
                g.into_iter()
                    .map(|g| ProbabilityGrid {
                        origin: pt(&g.origin),
                        resolution: g.resolution,
                        width: g.width,
                        height: g.height,
                        mass: g.mass,
                    })
                    .collect(),
            ),
        })
    }

    pub fn from_prediction(p: &AgentPrediction) -> Self {
        match p {
            AgentPrediction::Points(p) => WirePrediction::Points(p.iter().map(wire).collect()),
            AgentPrediction::Samples(s) => {
                WirePrediction::Samples(s.iter().map(|t| t.iter().map(wire).collect()).collect())
            }
            AgentPrediction::Mixture(m) => WirePrediction::Mixture(WireMixture {
                weights: m.weights.clone(),
                means: m.modes.iter().map(|mode| mode.iter().map(|g| wire(&g.mean)).collect()).collect(),
                covariances: m
                    .modes
                    .iter()
                    .map(|mode| {
                        mode.iter()
                            .map(|g| [[g.cov[(0, 0)], g.cov[(0, 1)]], [g.cov[(1, 0)], g.cov[(1, 1)]]])
                            .collect()
                    })
                    .collect(),
            }),
            AgentPrediction::Grid(g) => WirePrediction::Grid(
                g.iter()
                    .map(|g| WireGrid {
                        origin: wire(&g.origin),
                        resolution: g.resolution,
                        width: g.width,
                        height: g.height,
                        mass: g.mass.clone(),
                    })
                    .collect(),
            ),
        }
    }
}

/// Converts and validates an adapter response against the scenario it answers.
pub fn decode_prediction(
    scenario: &Scenario,
    agents: Vec<WireAgentPrediction>,
) -> Result<Prediction, DecodeError> {
    let mut out = Prediction::default();
    for a in agents {
        let id = AgentId(a.agent);
        if scenario.agent(id).is_none() {
            return Err(DecodeError::UnknownAgent(id));
        }
        let p = a
            .prediction
            .into_prediction()
            .map_err(|source| DecodeError::Invalid { agent: id, source })?;
        p.validate(scenario.pred_len)
            .map_err(|source| DecodeError::Invalid { agent: id, source })?;
        if out.agents.insert(id, p).is_some() {
            return Err(DecodeError::DuplicateAgent(id));
        }
    }
    for t in scenario.targets() {
        if !out.agents.contains_key(&t.id) {
            return Err(DecodeError::Invalid {
                agent: t.id,
                source: PredictionError::MissingAgent(t.id),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DecodeError {
    #[error("prediction for agent {0} which is not in the scenario")]
    UnknownAgent(AgentId),
    #[error("agent {0} predicted twice")]
    DuplicateAgent(AgentId),
    #[error("agent {agent}: {source}")]
    Invalid {
        agent: AgentId,
        #[source]
        source: PredictionError,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_tags() {
        let m: Message = serde_json::from_str(r#"{"type":"hello","version":1,"capabilities":["points"]}"#).unwrap();
        assert_eq!(m.kind(), "hello");
        assert_eq!(Message::Shutdown.to_line(), r#"{"type":"shutdown"}"#);
        assert!(serde_json::from_str::<Message>(r#"{"type":"bogus"}"#).is_err());
    }

    #[test]
    fn agent_prediction_shape() {
        let a: WireAgentPrediction = serde_json::from_str(r#"{"agent":3,"points":[[1,2],[3,4]]}"#).unwrap();
        assert_eq!(a.agent, 3);
        assert_eq!(a.prediction, WirePrediction::Points(vec![[1.0, 2.0], [3.0, 4.0]]));
        let line = serde_json::to_string(&a).unwrap();
        assert_eq!(line, r#"{"agent":3,"points":[[1.0,2.0],[3.0,4.0]]}"#);
    }
}
