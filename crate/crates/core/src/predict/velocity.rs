use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::Vec2;

/// Goals are placed this many frames ahead along the estimated velocity.
pub const GOAL_PROJECTION_STEPS: f64 = 40.0;

/// Gaussian-weighted average of the backward differences of an observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityFilter {
    pub sigma: f64,
}

impl Default for VelocityFilter {
    fn default() -> Self {
        Self { sigma: 1.5 }
    }
}

impl VelocityFilter {
    /// Normalized weights for lags `1..=n`, most recent first.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let two_var = 2.0 * self.sigma * self.sigma;
        let raw: Vec<f64> = (1..=n).map(|t| (-((t * t) as f64) / two_var).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|g| g / total).collect()
    }

    pub fn estimate(&self, observed: &[Vec2], dt: f64) -> Result<Vec2, PredictError> {
        let n = observed.len();
        if n < 2 {
            return Err(PredictError::TooFewObservations(n));
        }
        let weights = self.weights(n - 1);
        let mut v = Vec2::zeros();
        for (lag, w) in weights.iter().enumerate() {
            let newer = observed[n - 1 - lag];
            let older = observed[n - 2 - lag];
            v += (newer - older) / dt * *w;
        }
        Ok(v)
    }
}

/// How a predictor derives the current velocity from the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityEstimator {
    Gaussian { sigma: f64 },
    LastDifference,
}

impl Default for VelocityEstimator {
    fn default() -> Self {
        VelocityEstimator::Gaussian {
            sigma: VelocityFilter::default().sigma,
        }
    }
}

impl VelocityEstimator {
    pub fn validate(&self) -> Result<(), PredictError> {
        match self {
            VelocityEstimator::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => Err(
                PredictError::InvalidParams(format!("velocity filter sigma must be > 0, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn estimate(&self, observed: &[Vec2], dt: f64) -> Result<Vec2, PredictError> {
        match self {
            VelocityEstimator::Gaussian { sigma } => estimate_velocity(observed, dt, &VelocityFilter { sigma: *sigma }),
            VelocityEstimator::LastDifference => last_difference_velocity(observed, dt),
        }
    }
}

pub fn estimate_velocity(observed: &[Vec2], dt: f64, filter: &VelocityFilter) -> Result<Vec2, PredictError> {
    filter.estimate(observed, dt)
}

pub fn last_difference_velocity(observed: &[Vec2], dt: f64) -> Result<Vec2, PredictError> {
    let n = observed.len();
    if n < 2 {
        return Err(PredictError::TooFewObservations(n));
    }
    Ok((observed[n - 1] - observed[n - 2]) / dt)
}

pub fn project_goal(position: Vec2, velocity: Vec2, dt: f64) -> Vec2 {
    position + velocity * (GOAL_PROJECTION_STEPS * dt)
}
