//! Accuracy metrics.
//!
//! Geometric errors are Euclidean distances in meters. For each target agent:
//!
//! * points: ADE and FDE of the trajectory; best-of-K equals them (K = 1),
//! * samples: ADE and FDE averaged over the samples, best-of-K is the minimum,
//! * mixtures: ADE and FDE of the most likely mode's means, best-of-K over all modes' means,
//!   plus the negative log-likelihood (NLP) of the ground truth,
//! * grids: ADE and FDE of the per-step most likely cell center, plus NLP.
//!
//! Scenario values are means over target agents; [`aggregate`] summarizes scenarios.

use serde::{Deserialize, Serialize};

use crate::predict::{AgentPrediction, GaussianMixtureSequence, Prediction, PredictionError, ProbabilityGrid};
use crate::scenario::Scenario;
use crate::{AgentId, Vec2};

/// Densities are floored here before taking the logarithm.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("no prediction for target agent {0}")]
    MissingPrediction(AgentId),
    #[error("agent {agent}: {source}")]
    InvalidPrediction {
        agent: AgentId,
        #[source]
        source: PredictionError,
    },
    #[error("horizon of {requested} frames exceeds the {available} available")]
    Horizon { requested: usize, available: usize },
    #[error("scenario has no target agents")]
    NoTargets,
    #[error("trajectory lengths differ: {0} vs {1}")]
    Length(usize, usize),
}

fn check_len(pred: &[Vec2], truth: &[Vec2]) -> Result<(), MetricError> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(MetricError::Length(pred.len(), truth.len()));
    }
    Ok(())
}

/// Average displacement error.
pub fn ade(pred: &[Vec2], truth: &[Vec2]) -> Result<f64, MetricError> {
    check_len(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).norm()).sum();
    Ok(sum / truth.len() as f64)
}

/// Final displacement error.
pub fn fde(pred: &[Vec2], truth: &[Vec2]) -> Result<f64, MetricError> {
    check_len(pred, truth)?;
    Ok((pred[pred.len() - 1] - truth[truth.len() - 1]).norm())
}

/// Best-of-K ADE and FDE, each minimized independently over the trajectories.
pub fn top_k(trajectories: &[Vec<Vec2>], truth: &[Vec2]) -> Result<(f64, f64), MetricError> {
    let mut best = (f64::INFINITY, f64::INFINITY);
    for t in trajectories {
        best.0 = best.0.min(ade(t, truth)?);
        best.1 = best.1.min(fde(t, truth)?);
    }
    if trajectories.is_empty() {
        return Err(MetricError::Length(0, truth.len()));
    }
    Ok(best)
}

/// Mean over timesteps of `-ln max(p(truth_t), floor)`.
pub fn nlp_mixture(mixture: &GaussianMixtureSequence, truth: &[Vec2]) -> f64 {
    let sum: f64 = truth
        .iter()
        .enumerate()
        .map(|(t, x)| -mixture.density(t, x).max(DENSITY_FLOOR).ln())
        .sum();
    sum / truth.len() as f64
}

pub fn nlp_grid(grids: &[ProbabilityGrid], truth: &[Vec2]) -> f64 {
    let sum: f64 = grids
        .iter()
        .zip(truth)
        .map(|(g, x)| -g.density(x).max(DENSITY_FLOOR).ln())
        .sum();
    sum / truth.len() as f64
}

/// Scores of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentScore {
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    pub nlp: Option<f64>,
}

/// Scores one agent on the first `truth.len()` predicted steps.
pub fn score_agent(prediction: &AgentPrediction, truth: &[Vec2]) -> Result<AgentScore, MetricError> {
    let h = truth.len();
    let cut = |t: &[Vec2]| t[..h.min(t.len())].to_vec();
    let trajectories: Vec<Vec<Vec2>> = prediction.trajectories().iter().map(|t| cut(t)).collect();
    let (min_ade, min_fde) = top_k(&trajectories, truth)?;
    let (ade_v, fde_v, nlp) = match prediction {
        AgentPrediction::Points(p) => {
            let p = cut(p);
            (ade(&p, truth)?, fde(&p, truth)?, None)
        }
        AgentPrediction::Samples(_) => {
            let n = trajectories.len() as f64;
            let mut a = 0.0;
            let mut f = 0.0;
            for t in &trajectories {
                a += ade(t, truth)?;
                f += fde(t, truth)?;
            }
            (a / n, f / n, None)
        }
        AgentPrediction::Mixture(m) => {
            let means = cut(&m.dominant_mode_means());
            (ade(&means, truth)?, fde(&means, truth)?, Some(nlp_mixture(m, truth)))
        }
        AgentPrediction::Grid(g) => {
            let modes = &trajectories[0];
            (ade(modes, truth)?, fde(modes, truth)?, Some(nlp_grid(&g[..h.min(g.len())], truth)))
        }
    };
    Ok(AgentScore {
        ade: ade_v,
        fde: fde_v,
        min_ade,
        min_fde,
        nlp,
    })
}

/// Target-averaged scores of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    /// Mean over the targets with a probabilistic prediction.
    pub nlp: Option<f64>,
    pub targets: usize,
}

/// Scores every target over the scenario's full horizon.
pub fn score_scenario(scenario: &Scenario, prediction: &Prediction) -> Result<ScenarioScore, MetricError> {
    score_scenario_at(scenario, prediction, scenario.pred_len)
}

/// Scores every target over the first `horizon` predicted frames.
pub fn score_scenario_at(
    scenario: &Scenario,
    prediction: &Prediction,
    horizon: usize,
) -> Result<ScenarioScore, MetricError> {
    if horizon == 0 || horizon > scenario.pred_len {
        return Err(MetricError::Horizon {
            requested: horizon,
            available: scenario.pred_len,
        });
    }
    let mut acc = [0.0; 4];
    let mut nlp_sum = 0.0;
    let mut nlp_n = 0usize;
    let mut n = 0usize;
    let mut targets: Vec<_> = scenario.targets().collect();
    targets.sort_by_key(|t| t.id);
    for target in targets {
        let p = prediction
            .get(target.id)
            .ok_or(MetricError::MissingPrediction(target.id))?;
        p.validate(scenario.pred_len)
            .map_err(|source| MetricError::InvalidPrediction {
                agent: target.id,
                source,
            })?;
        let s = score_agent(p, &target.future[..horizon])?;
        acc[0] += s.ade;
        acc[1] += s.fde;
        acc[2] += s.min_ade;
        acc[3] += s.min_fde;
        if let Some(v) = s.nlp {
            nlp_sum += v;
            nlp_n += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::NoTargets);
    }
    let nf = n as f64;
    Ok(ScenarioScore {
        ade: acc[0] / nf,
        fde: acc[1] / nf,
        min_ade: acc[2] / nf,
        min_fde: acc[3] / nf,
        nlp: (nlp_n > 0).then(|| nlp_sum / nlp_n as f64),
        targets: n,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt() })
    }
}

/// Summary over scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub ade: Stat,
    pub fde: Stat,
    pub min_ade: Stat,
    pub min_fde: Stat,
    pub nlp: Option<Stat>,
    pub scenarios: usize,
    pub targets: usize,
}

pub fn aggregate(scores: &[ScenarioScore]) -> Option<MetricSummary> {
    let col = |f: fn(&ScenarioScore) -> f64| -> Vec<f64> { scores.iter().map(f).collect() };
    let nlps: Vec<f64> = scores.iter().filter_map(|s| s.nlp).collect();
    Some(MetricSummary {
        ade: Stat::of(&col(|s| s.ade))?,
        fde: Stat::of(&col(|s| s.fde))?,
        min_ade: Stat::of(&col(|s| s.min_ade))?,
        min_fde: Stat::of(&col(|s| s.min_fde))?,
        nlp: Stat::of(&nlps),
        scenarios: scores.len(),
        targets: scores.iter().map(|s| s.targets).sum(),
    })
}
