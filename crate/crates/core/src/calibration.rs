//! Hyperparameter calibration by seeded random search followed by coordinate descent.
//!
//! Trial 0 evaluates the defaults. Random trials draw every bounded parameter
//! independently from its range, each trial from its own sub-seed so the sequence does not
//! depend on how earlier trials went. The remaining budget refines the incumbent one
//! coordinate at a time: step up, else step down, else halve that coordinate's step.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{score_scenario_at, MetricError};
use crate::dataset::{AgentTrack, Dataset};
use crate::predict::{ParamBound, ParamMap, PredictError, PredictorKind, Scale, VelocityEstimator};
use crate::rng::{keyed_rng, mix_seed};
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("calibration budget must be at least 1")]
    ZeroBudget,
    #[error("bad bound for '{name}': {message}")]
    Bound { name: String, message: String },
    #[error("refine_fraction must lie in [0, 1], got {0}")]
    RefineFraction(f64),
    #[error("calibration fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("calibration split leaves the {0} subset empty")]
    EmptySplit(&'static str),
    #[error("no calibration scenarios")]
    NoScenarios,
    #[error("default parameters failed: {0}")]
    DefaultsFailed(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Fde,
    Ade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Total number of objective evaluations, defaults included.
    pub budget: usize,
    pub seed: u64,
    /// Share of the budget spent on refinement.
    pub refine_fraction: f64,
    pub objective: Objective,
    /// Frames scored by the objective; the full scenario horizon when `None`.
    pub horizon: Option<usize>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            seed: 0,
            refine_fraction: 0.3,
            objective: Objective::Fde,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Default,
    Random,
    Refine,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Default => "default",
            Phase::Random => "random",
            Phase::Refine => "refine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub phase: Phase,
    pub params: ParamMap,
    /// `inf` when the evaluation failed.
    pub objective: f64,
    /// Best objective so far, this trial included.
    pub incumbent: f64,
    /// Seconds since the search started, taken after the evaluation.
    pub elapsed_s: f64,
}

impl Trial {
    /// Equality ignoring the timestamp.
    pub fn same_outcome(&self, other: &Trial) -> bool {
        self.index == other.index
            && self.phase == other.phase
            && self.params == other.params
            && self.objective.to_bits() == other.objective.to_bits()
            && self.incumbent.to_bits() == other.incumbent.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best_params: ParamMap,
    pub best_objective: f64,
    pub default_objective: f64,
    pub seed: u64,
    pub budget: usize,
    pub trace: Vec<Trial>,
}

impl CalibrationResult {
    /// CSV rendering of the trace, one row per trial.
    pub fn trace_csv(&self) -> String {
        let names: Vec<&String> = self.trace.first().map(|t| t.params.keys().collect()).unwrap_or_default();
        let mut out = String::from("trial,phase,objective,incumbent,elapsed_s");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for t in &self.trace {
            let _ = write!(
                out,
                "{},{},{},{},{:.6}",
                t.index,
                t.phase.name(),
                t.objective,
                t.incumbent,
                t.elapsed_s
            );
            for n in &names {
                let _ = write!(out, ",{}", t.params[*n]);
            }
            out.push('\n');
        }
        out
    }
}

/// Search space: the bounded parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub params: Vec<ParamBound>,
}

impl ParamSpace {
    pub fn new(params: Vec<ParamBound>) -> Result<Self, CalibrationError> {
        let s = Self { params };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        check_bounds(&self.params)
    }

    pub fn contains(&self, params: &ParamMap) -> bool {
        self.params
            .iter()
            .all(|b| params.get(&b.name).is_some_and(|v| *v >= b.min && *v <= b.max))
    }
}

/// Splits by time: detections before `t_min + fraction * (t_max - t_min)` calibrate, the
/// rest are held out.
pub fn split_calibration(dataset: &Dataset, fraction: f64) -> Result<(Dataset, Dataset), CalibrationError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CalibrationError::Fraction(fraction));
    }
    let (t0, t1) = dataset.time_range().ok_or(CalibrationError::EmptySplit("calibration"))?;
    let cut = t0 + fraction * (t1 - t0);
    let part = |keep: &dyn Fn(f64) -> bool, what: &'static str| -> Result<Dataset, CalibrationError> {
        let tracks: Vec<AgentTrack> = dataset
            .tracks
            .iter()
            .map(|t| AgentTrack {
                agent: t.agent,
                detections: t.detections.iter().filter(|d| keep(d.time)).copied().collect(),
            })
            .filter(|t| !t.detections.is_empty())
            .collect();
        if tracks.is_empty() {
            return Err(CalibrationError::EmptySplit(what));
        }
        Ok(Dataset {
            tracks,
            ..dataset.clone()
        })
    };
    Ok((part(&|t| t < cut, "calibration")?, part(&|t| t >= cut, "holdout")?))
}

fn check_bounds(bounds: &[ParamBound]) -> Result<(), CalibrationError> {
    for b in bounds {
        let err = |message: &str| {
            Err(CalibrationError::Bound {
                name: b.name.clone(),
                message: message.to_string(),
            })
        };
        if !(b.min.is_finite() && b.max.is_finite()) || b.min >= b.max {
            return err("min and max must be finite with min < max");
        }
        if b.scale == Scale::Log && b.min <= 0.0 {
            return err("log-scaled ranges need min > 0");
        }
    }
    Ok(())
}

fn sample(bound: &ParamBound, rng: &mut impl Rng) -> f64 {
    match bound.scale {
        Scale::Linear => rng.random_range(bound.min..=bound.max),
        Scale::Log => rng.random_range(bound.min.ln()..=bound.max.ln()).exp().clamp(bound.min, bound.max),
    }
}

/// Minimizes `evaluate` over the box `bounds`, starting from `defaults`.
///
/// Parameters without a bound keep their default. Errors and non-finite values from
/// `evaluate` count as `inf`, except for the defaults, which must evaluate.
pub fn calibrate<F, E>(
    space: &ParamSpace,
    defaults: &ParamMap,
    config: &CalibrationConfig,
    mut evaluate: F,
) -> Result<CalibrationResult, CalibrationError>
where
    F: FnMut(&ParamMap) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if config.budget == 0 {
        return Err(CalibrationError::ZeroBudget);
    }
    if !(0.0..=1.0).contains(&config.refine_fraction) {
        return Err(CalibrationError::RefineFraction(config.refine_fraction));
    }
    space.validate()?;
    let bounds = &space.params[..];
    let start = Instant::now();

    let mut trace: Vec<Trial> = Vec::with_capacity(config.budget);
    let mut best_params = defaults.clone();
    for b in bounds {
        best_params.entry(b.name.clone()).or_insert((b.min + b.max) / 2.0);
    }
    let default_objective = match evaluate(&best_params) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => return Err(CalibrationError::DefaultsFailed(format!("objective {v}"))),
        Err(e) => return Err(CalibrationError::DefaultsFailed(e.to_string())),
    };
    let mut best = default_objective;
    trace.push(Trial {
        index: 0,
        phase: Phase::Default,
        params: best_params.clone(),
        objective: best,
        incumbent: best,
        elapsed_s: start.elapsed().as_secs_f64(),
    });

    let refine = if bounds.is_empty() {
        0
    } else {
        ((config.budget as f64 * config.refine_fraction).floor() as usize).min(config.budget - 1)
    };
    let random = if bounds.is_empty() { 0 } else { config.budget - 1 - refine };

    let mut run = |params: ParamMap, phase: Phase, trace: &mut Vec<Trial>, best: &mut f64, best_params: &mut ParamMap| {
        let objective = match evaluate(&params) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                log::debug!("trial {} failed: {e}", trace.len());
                f64::INFINITY
            }
        };
        let improved = objective < *best;
        if improved {
            *best = objective;
            *best_params = params.clone();
        }
        trace.push(Trial {
            index: trace.len(),
            phase,
            params,
            objective,
            incumbent: *best,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        improved
    };

    let base = best_params.clone();
    for _ in 0..random {
        let i = trace.len() as u64;
        let mut rng = keyed_rng(&[mix_seed(&[config.seed, i])]);
        let mut params = base.clone();
        for b in bounds {
            params.insert(b.name.clone(), sample(b, &mut rng));
        }
        run(params, Phase::Random, &mut trace, &mut best, &mut best_params);
    }

    let mut steps: Vec<f64> = bounds.iter().map(|b| 0.2 * b.width()).collect();
    let mut coord = 0;
    // +1 then -1 per coordinate before halving
    let mut direction = 1.0;
    for _ in 0..refine {
        let b = &bounds[coord];
        let mut params = best_params.clone();
        let current = params[&b.name];
        params.insert(b.name.clone(), b.clamp(current + direction * steps[coord]));
        let improved = run(params, Phase::Refine, &mut trace, &mut best, &mut best_params);
        if improved {
            direction = 1.0;
            coord = (coord + 1) % bounds.len();
        } else if direction > 0.0 {
            direction = -1.0;
        } else {
            steps[coord] /= 2.0;
            direction = 1.0;
            coord = (coord + 1) % bounds.len();
        }
    }

    Ok(CalibrationResult {
        best_params,
        best_objective: best,
        default_objective,
        seed: config.seed,
        budget: config.budget,
        trace,
    })
}

/// Mean objective of a parameter assignment over `scenarios`.
pub fn evaluate_params(
    kind: PredictorKind,
    params: &ParamMap,
    velocity: VelocityEstimator,
    scenarios: &[Scenario],
    config: &CalibrationConfig,
) -> Result<f64, CalibrationError> {
    if scenarios.is_empty() {
        return Err(CalibrationError::NoScenarios);
    }
    let mut predictor = kind.build(params, velocity)?;
    let mut total = 0.0;
    for s in scenarios {
        let horizon = config.horizon.unwrap_or(s.pred_len);
        let prediction = predictor.predict(s)?;
        let score = score_scenario_at(s, &prediction, horizon)?;
        total += match config.objective {
            Objective::Fde => score.fde,
            Objective::Ade => score.ade,
        };
    }
    Ok(total / scenarios.len() as f64)
}

/// Calibrates a built-in predictor on `scenarios` within its default bounds.
pub fn calibrate_predictor(
    kind: PredictorKind,
    velocity: VelocityEstimator,
    scenarios: &[Scenario],
    config: &CalibrationConfig,
) -> Result<CalibrationResult, CalibrationError> {
    calibrate_within(kind, &ParamSpace::new(kind.default_bounds())?, velocity, scenarios, config)
}

pub fn calibrate_within(
    kind: PredictorKind,
    space: &ParamSpace,
    velocity: VelocityEstimator,
    scenarios: &[Scenario],
    config: &CalibrationConfig,
) -> Result<CalibrationResult, CalibrationError> {
    if scenarios.is_empty() {
        return Err(CalibrationError::NoScenarios);
    }
    calibrate(space, &kind.default_params(), config, |p| {
        evaluate_params(kind, p, velocity, scenarios, config)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(p: &ParamMap) -> Result<f64, String> {
        Ok((p["x"] - 0.7).powi(2) + (p["y"] + 0.2).powi(2))
    }

    fn bounds() -> ParamSpace {
        ParamSpace::new(vec![ParamBound::linear("x", -1.0, 1.0), ParamBound::linear("y", -1.0, 1.0)]).unwrap()
    }

    fn defaults() -> ParamMap {
        [("x".to_string(), 0.0), ("y".to_string(), 0.0)].into()
    }

    #[test]
    fn trace_has_budget_length_and_monotone_incumbent() {
        let cfg = CalibrationConfig {
            budget: 40,
            ..Default::default()
        };
        let r = calibrate(&bounds(), &defaults(), &cfg, bowl).unwrap();
        assert_eq!(r.trace.len(), 40);
        assert!(r.trace.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
        assert!(r.best_objective < 0.05, "{}", r.best_objective);
        assert_eq!(r.trace[0].phase, Phase::Default);
    }

    #[test]
    fn samples_stay_in_bounds() {
        let mut b = bounds();
        b.params[1].scale = Scale::Log;
        b.params[1].min = 0.01;
        let cfg = CalibrationConfig {
            budget: 60,
            ..Default::default()
        };
        let r = calibrate(&b, &defaults(), &cfg, bowl).unwrap();
        for t in &r.trace[1..] {
            assert!((-1.0..=1.0).contains(&t.params["x"]));
            assert!((0.01..=1.0).contains(&t.params["y"]));
        }
    }

    #[test]
    fn failing_trials_count_as_infinite() {
        let cfg = CalibrationConfig {
            budget: 10,
            ..Default::default()
        };
        let r = calibrate(&bounds(), &defaults(), &cfg, |p| {
            if p["x"] > 0.0 {
                Err("diverged".to_string())
            } else {
                bowl(p)
            }
        })
        .unwrap();
        assert!(r.trace.iter().any(|t| t.objective.is_infinite()));
        assert!(r.best_params["x"] <= 0.0);
    }

    #[test]
    fn split_by_time_quantile() {
        let dets = (0..100)
            .map(|f| crate::Detection {
                frame: f,
                time: f as f64 * 0.4,
                agent: crate::AgentId(1),
                position: crate::Vec2::new(f as f64, 0.0),
            })
            .collect();
        let ds = Dataset::from_detections("d", dets, Some(2.5), None).unwrap();
        for (f, last) in [(0.3, 29), (0.2, 19)] {
            let (cal, hold) = split_calibration(&ds, f).unwrap();
            assert_eq!(cal.tracks[0].last_frame(), Some(last));
            assert_eq!(hold.tracks[0].first_frame(), Some(last + 1));
        }
        assert!(split_calibration(&ds, 1.0).is_err());
        assert!(split_calibration(&ds, 0.0).is_err());
    }

    #[test]
    fn budget_one_returns_defaults() {
        let cfg = CalibrationConfig {
            budget: 1,
            ..Default::default()
        };
        let r = calibrate(&bounds(), &defaults(), &cfg, bowl).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best_params, defaults());
        assert_eq!(r.best_objective, bowl(&defaults()).unwrap());
    }

    #[test]
    fn invalid_setup() {
        let cfg = CalibrationConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(matches!(calibrate(&bounds(), &defaults(), &cfg, bowl), Err(CalibrationError::ZeroBudget)));
        let mut b = bounds();
        b.params[0].min = 2.0;
        assert!(calibrate(&b, &defaults(), &CalibrationConfig::default(), bowl).is_err());
    }
}
