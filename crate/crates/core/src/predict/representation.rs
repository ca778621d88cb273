use std::collections::BTreeMap;
use std::f64::consts::PI;


use crate::{AgentId, Mat2, Vec2};

const MIXTURE_WEIGHT_TOL: f64 = 1e-9;
const GRID_MASS_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PredictionError {
    #[error("expected {expected} timesteps, got {got}")]
    Length { expected: usize, got: usize },
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("non-finite value in prediction")]
    NonFinite,
    #[error("grid at step {step} sums to {sum}")]
    GridMass { step: usize, sum: f64 },
    #[error("grid at step {step} is malformed: {message}")]
    GridShape { step: usize, message: String },
    #[error("mixture weights sum to {0}")]
    MixtureWeights(f64),
    #[error("negative mixture weight {0}")]
    NegativeWeight(f64),
    #[error("mixture has no modes")]
    EmptyMixture,
    #[error("covariance is not symmetric positive definite: {0:?}")]
    NotSpd([f64; 4]),
    #[error("missing prediction for target agent {0}")]
    MissingAgent(AgentId),
}

/// Bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean: Vec2,
    pub cov: Mat2,
}

impl Gaussian2 {
    pub fn new(mean: Vec2, cov: Mat2) -> Result<Self, PredictionError> {
        let g = Self { mean, cov };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<(), PredictionError> {
        let c = &self.cov;
        let raw = [c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]];
        if !(self.mean.x.is_finite() && self.mean.y.is_finite()) || raw.iter().any(|v| !v.is_finite()) {
            return Err(PredictionError::NonFinite);
        }
        let scale = raw[0].abs().max(raw[3].abs()).max(f64::MIN_POSITIVE);
        if (raw[1] - raw[2]).abs() > 1e-9 * scale || c.cholesky().is_none() {
            return Err(PredictionError::NotSpd(raw));
        }
        Ok(())
    }

    /// Log density; assumes the covariance passed [`Gaussian2::new`].
    pub fn log_density(&self, x: &Vec2) -> f64 {
        let chol = self
            .cov
            .cholesky()
            .expect("covariance validated as positive definite");
        let l = chol.l();
        let d = x - self.mean;
        let z = chol.solve(&d);
        let maha = d.dot(&z);
        let log_det = 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln());
        -0.5 * maha - 0.5 * log_det - (2.0 * PI).ln()
    }

    pub fn density(&self, x: &Vec2) -> f64 {
        self.log_density(x).exp()
    }
}

/// K motion modes, each a sequence of Gaussians over the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSequence {
    pub weights: Vec<f64>,
    /// `modes[k][t]`.
    pub modes: Vec<Vec<Gaussian2>>,
}

impl GaussianMixtureSequence {
    pub fn density(&self, step: usize, x: &Vec2) -> f64 {
        self.weights
            .iter()
            .zip(&self.modes)
            .map(|(w, mode)| w * mode[step].density(x))
            .sum()
    }

    /// Mean sequence of the most likely mode.
    pub fn dominant_mode_means(&self) -> Vec<Vec2> {
        let best = self
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i);
        self.modes[best].iter().map(|g| g.mean).collect()
    }
}

/// Probability mass over a regular grid for one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    /// Lower-left corner, meters.
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `iy * width + ix`, `iy = 0` lowest.
    pub mass: Vec<f64>,
}

impl ProbabilityGrid {
    /// Probability density (mass / cell area) at `x`; zero outside the grid.
    pub fn density(&self, x: &Vec2) -> f64 {
        let rel = (x - self.origin) / self.resolution;
        let (fx, fy) = (rel.x.floor(), rel.y.floor());
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return 0.0;
        }
        self.mass[fy as usize * self.width + fx as usize] / (self.resolution * self.resolution)
    }

    /// Center of the cell with the largest mass (lowest index on ties).
    pub fn mode(&self) -> Vec2 {
        let mut best = 0;
        for (i, m) in self.mass.iter().enumerate() {
            if *m > self.mass[best] {
                best = i;
            }
        }
        let (ix, iy) = (best % self.width, best / self.width);
        self.origin + Vec2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.resolution
    }

    fn check(&self, step: usize) -> Result<(), PredictionError> {
        let shape = |message: &str| PredictionError::GridShape {
            step,
            message: message.to_string(),
        };
        if self.width == 0 || self.height == 0 || self.mass.len() != self.width * self.height {
            return Err(shape("cell count does not match dimensions"));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(shape("resolution must be positive"));
        }
        if self.mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(shape("cell masses must be finite and non-negative"));
        }
        let sum: f64 = self.mass.iter().sum();
        if (sum - 1.0).abs() > GRID_MASS_TOL {
            return Err(PredictionError::GridMass { step, sum });
        }
        Ok(())
    }
}

/// Future distribution for one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentPrediction {
    Points(Vec<Vec2>),
    /// `samples[k][t]`.
    Samples(Vec<Vec<Vec2>>),
    Grid(Vec<ProbabilityGrid>),
    Mixture(GaussianMixtureSequence),
}

impl AgentPrediction {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentPrediction::Points(_) => "points",
            AgentPrediction::Samples(_) => "samples",
            AgentPrediction::Grid(_) => "grid",
            AgentPrediction::Mixture(_) => "mixture",
        }
    }

    /// Checks the representation invariants for a horizon of `pred_len` steps.
    pub fn validate(&self, pred_len: usize) -> Result<(), PredictionError> {
        let check_len = |got: usize| {
            if got == pred_len {
                Ok(())
            } else {
                Err(PredictionError::Length {
                    expected: pred_len,
                    got,
                })
            }
        };
        let finite = |points: &[Vec2]| points.iter().all(|p| p.x.is_finite() && p.y.is_finite());
        match self {
            AgentPrediction::Points(points) => {
                check_len(points.len())?;
                if !finite(points) {
                    return Err(PredictionError::NonFinite);
                }
            }
            AgentPrediction::Samples(samples) => {
                if samples.is_empty() {
                    return Err(PredictionError::EmptySampleSet);
                }
                for s in samples {
                    check_len(s.len())?;
                    if !finite(s) {
                        return Err(PredictionError::NonFinite);
                    }
                }
            }
            AgentPrediction::Grid(grids) => {
                check_len(grids.len())?;
                for (step, g) in grids.iter().enumerate() {
                    g.check(step)?;
                }
            }
            AgentPrediction::Mixture(m) => {
                if m.modes.is_empty() {
                    return Err(PredictionError::EmptyMixture);
                }
                if m.weights.len() != m.modes.len() {
                    return Err(PredictionError::Length {
                        expected: m.modes.len(),
                        got: m.weights.len(),
                    });
                }
                if let Some(w) = m.weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
                    return Err(PredictionError::NegativeWeight(*w));
                }
                let sum: f64 = m.weights.iter().sum();
                if (sum - 1.0).abs() > MIXTURE_WEIGHT_TOL {
                    return Err(PredictionError::MixtureWeights(sum));
                }
                for mode in &m.modes {
                    check_len(mode.len())?;
                    for g in mode {
                        g.check()?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Trajectories used for geometric scoring: the points themselves, every sample,
    /// every mixture mode's mean sequence, or the per-step grid mode.
    pub fn trajectories(&self) -> Vec<Vec<Vec2>> {
        match self {
            AgentPrediction::Points(p) => vec![p.clone()],
            AgentPrediction::Samples(s) => s.clone(),
            AgentPrediction::Grid(g) => vec![g.iter().map(ProbabilityGrid::mode).collect()],
            AgentPrediction::Mixture(m) => m
                .modes
                .iter()
                .map(|mode| mode.iter().map(|g| g.mean).collect())
                .collect(),
        }
    }
}

/// Predictions for the agents of one scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prediction {
    pub agents: BTreeMap<AgentId, AgentPrediction>,
}

impl Prediction {
    pub fn get(&self, id: AgentId) -> Option<&AgentPrediction> {
        self.agents.get(&id)
    }

    /// Every target of the scenario must be present and valid.
    pub fn validate_for(&self, scenario: &crate::Scenario) -> Result<(), PredictionError> {
        for target in scenario.targets() {
            self.agents
                .get(&target.id)
                .ok_or(PredictionError::MissingAgent(target.id))?
                .validate(scenario.pred_len)?;
        }
        for p in self.agents.values() {
            p.validate(scenario.pred_len)?;
        }
        Ok(())
    }
}
