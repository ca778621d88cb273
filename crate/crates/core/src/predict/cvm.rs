use super::{AgentPrediction, PredictError, Prediction, Predictor, VelocityEstimator};
use crate::scenario::Scenario;

/// Constant-velocity model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cvm {
    pub velocity: VelocityEstimator,
}

impl Predictor for Cvm {
    fn id(&self) -> String {
        "cvm".to_string()
    }

    fn predict(&mut self, scenario: &Scenario) -> Result<Prediction, PredictError> {
        predict_cvm(scenario, &self.velocity)
    }
}

pub fn predict_cvm(scenario: &Scenario, velocity: &VelocityEstimator) -> Result<Prediction, PredictError> {
    velocity.validate()?;
    let mut out = Prediction::default();
    for agent in &scenario.agents {
        let v = velocity.estimate(&agent.observed, scenario.dt)?;
        let last = agent.last_observed();
        let points = (1..=scenario.pred_len)
            .map(|t| last + v * (t as f64 * scenario.dt))
            .collect();
        out.agents.insert(agent.id, AgentPrediction::Points(points));
    }
    Ok(out)
}
