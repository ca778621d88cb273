use super::{
    project_goal, AgentPrediction, ParamBound, ParamMap, PredictError, Prediction, Predictor,
    VelocityEstimator,
};
use crate::dataset::GridMap;
use crate::scenario::Scenario;
use crate::Vec2;

const GOAL_REACHED: f64 = 1e-6;
const MAX_SPEED_FACTOR: f64 = 1.3;
/// Obstacle lookups stop at this many interaction ranges beyond the body radius.
const OBSTACLE_RANGE_CUTOFF: f64 = 10.0;
const OBSTACLE_SEARCH_LIMIT: f64 = 5.0;

/// Social force parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SofParams {
    /// Relaxation time, s.
    pub tau: f64,
    pub agent_strength: f64,
    /// Range of agent repulsion, m.
    pub agent_range: f64,
    /// Weight of interactions from behind (1 = isotropic).
    pub anisotropy: f64,
    pub obstacle_strength: f64,
    pub obstacle_range: f64,
    /// Body radius, m.
    pub radius: f64,
    /// Integration substep, s.
    pub sub_dt: f64,
}

impl Default for SofParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            agent_strength: 2.1,
            agent_range: 0.3,
            anisotropy: 0.35,
            obstacle_strength: 10.0,
            obstacle_range: 0.2,
            radius: 0.3,
            sub_dt: 0.1,
        }
    }
}

macro_rules! param_fields {
    ($($name:ident),*) => {
        const FIELDS: &[&str] = &[$(stringify!($name)),*];
        fn get(&self, key: &str) -> Option<f64> {
            match key {
                $(stringify!($name) => Some(self.$name),)*
                _ => None,
            }
        }
        fn set(&mut self, key: &str, value: f64) -> bool {
            match key {
                $(stringify!($name) => { self.$name = value; true })*
                _ => false,
            }
        }
    };
}

impl SofParams {
    param_fields!(tau, agent_strength, agent_range, anisotropy, obstacle_strength, obstacle_range, radius, sub_dt);

    pub fn to_map(&self) -> ParamMap {
        Self::FIELDS
            .iter()
            .map(|k| (k.to_string(), self.get(k).expect("listed field")))
            .collect()
    }

    /// Overrides defaults with the entries of `map`; unknown names are rejected.
    pub fn from_map(map: &ParamMap) -> Result<Self, PredictError> {
        let mut p = Self::default();
        for (k, v) in map {
            if !p.set(k, *v) {
                return Err(PredictError::InvalidParams(format!("unknown social force parameter '{k}'")));
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn bounds() -> Vec<ParamBound> {
        vec![
            ParamBound::linear("tau", 0.2, 2.0),
            ParamBound::linear("agent_strength", 0.0, 10.0),
            ParamBound::linear("agent_range", 0.1, 3.0),
            ParamBound::linear("anisotropy", 0.0, 1.0),
            ParamBound::linear("radius", 0.2, 0.5),
            ParamBound::linear("obstacle_strength", 0.0, 10.0),
            ParamBound::linear("obstacle_range", 0.05, 1.0),
        ]
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        for k in Self::FIELDS {
            let v = self.get(k).expect("listed field");
            if !v.is_finite() {
                return Err(invalid(k, v, "must be finite"));
            }
        }
        for (k, v) in [
            ("tau", self.tau),
            ("agent_range", self.agent_range),
            ("obstacle_range", self.obstacle_range),
            ("radius", self.radius),
            ("sub_dt", self.sub_dt),
        ] {
            if v <= 0.0 {
                return Err(invalid(k, v, "must be > 0"));
            }
        }
        for (k, v) in [
            ("agent_strength", self.agent_strength),
            ("obstacle_strength", self.obstacle_strength),
        ] {
            if v < 0.0 {
                return Err(invalid(k, v, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.anisotropy) {
            return Err(invalid("anisotropy", self.anisotropy, "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Social force parameters plus the anticipatory collision-avoidance term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaraParams {
    pub social: SofParams,
    /// Look-ahead for predicted collisions, s.
    pub anticipation_horizon: f64,
    pub evasive_strength: f64,
    /// Minimum predicted clearance used to saturate the evasive force, m.
    pub personal_distance: f64,
}

/// The evasive term is stiff when agents start close, so it gets a finer default step.
pub const KARA_SUB_DT: f64 = 0.05;

impl Default for KaraParams {
    fn default() -> Self {
        Self {
            social: SofParams {
                sub_dt: KARA_SUB_DT,
                ..SofParams::default()
            },
            anticipation_horizon: 3.0,
            evasive_strength: 1.5,
            personal_distance: 0.3,
        }
    }
}

impl KaraParams {
    const OWN: &'static [&'static str] = &["anticipation_horizon", "evasive_strength", "personal_distance"];

    fn own(&mut self, key: &str) -> Option<&mut f64> {
        match key {
            "anticipation_horizon" => Some(&mut self.anticipation_horizon),
            "evasive_strength" => Some(&mut self.evasive_strength),
            "personal_distance" => Some(&mut self.personal_distance),
            _ => None,
        }
    }

    pub fn to_map(&self) -> ParamMap {
        let mut m = self.social.to_map();
        m.insert("anticipation_horizon".into(), self.anticipation_horizon);
        m.insert("evasive_strength".into(), self.evasive_strength);
        m.insert("personal_distance".into(), self.personal_distance);
        m
    }

    pub fn from_map(map: &ParamMap) -> Result<Self, PredictError> {
        let mut p = Self::default();
        for (k, v) in map {
            if let Some(slot) = p.own(k) {
                *slot = *v;
            } else if !p.social.set(k, *v) {
                return Err(PredictError::InvalidParams(format!("unknown karamouzas parameter '{k}'")));
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn bounds() -> Vec<ParamBound> {
        let mut b = SofParams::bounds();
        b.push(ParamBound::linear("evasive_strength", 0.0, 10.0));
        b.push(ParamBound::linear("anticipation_horizon", 0.5, 5.0));
        b.push(ParamBound::linear("personal_distance", 0.2, 1.0));
        b
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        self.social.validate()?;
        let mut copy = *self;
        for k in Self::OWN {
            let v = *copy.own(k).expect("listed field");
            if !v.is_finite() {
                return Err(invalid(k, v, "must be finite"));
            }
        }
        if self.anticipation_horizon <= 0.0 {
            return Err(invalid("anticipation_horizon", self.anticipation_horizon, "must be > 0"));
        }
        if self.personal_distance <= 0.0 {
            return Err(invalid("personal_distance", self.personal_distance, "must be > 0"));
        }
        if self.evasive_strength < 0.0 {
            return Err(invalid("evasive_strength", self.evasive_strength, "must be >= 0"));
        }
        Ok(())
    }
}

fn invalid(name: &str, value: f64, why: &str) -> PredictError {
    PredictError::InvalidParams(format!("{name} = {value} {why}"))
}

/// Social force predictor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SocialForce {
    pub params: SofParams,
    pub velocity: VelocityEstimator,
}

impl Predictor for SocialForce {
    fn id(&self) -> String {
        "social_force".to_string()
    }

    fn predict(&mut self, scenario: &Scenario) -> Result<Prediction, PredictError> {
        predict_social_force(scenario, &self.params, &self.velocity)
    }
}

/// Social force with anticipatory collision avoidance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Karamouzas {
    pub params: KaraParams,
    pub velocity: VelocityEstimator,
}

impl Predictor for Karamouzas {
    fn id(&self) -> String {
        "karamouzas".to_string()
    }

    fn predict(&mut self, scenario: &Scenario) -> Result<Prediction, PredictError> {
        predict_karamouzas(scenario, &self.params, &self.velocity)
    }
}

pub fn predict_social_force(
    scenario: &Scenario,
    params: &SofParams,
    velocity: &VelocityEstimator,
) -> Result<Prediction, PredictError> {
    params.validate()?;
    simulate(scenario, params, None, velocity)
}

pub fn predict_karamouzas(
    scenario: &Scenario,
    params: &KaraParams,
    velocity: &VelocityEstimator,
) -> Result<Prediction, PredictError> {
    params.validate()?;
    simulate(scenario, &params.social, Some(params), velocity)
}

#[derive(Debug, Clone, Copy)]
struct State {
    p: Vec2,
    v: Vec2,
    goal: Vec2,
    speed: f64,
}

fn simulate(
    scenario: &Scenario,
    params: &SofParams,
    anticipation: Option<&KaraParams>,
    velocity: &VelocityEstimator,
) -> Result<Prediction, PredictError> {
    velocity.validate()?;
    let dt = scenario.dt;
    if params.sub_dt > dt + 1e-12 {
        return Err(invalid("sub_dt", params.sub_dt, &format!("exceeds frame interval {dt}")));
    }
    let mut states = Vec::with_capacity(scenario.agents.len());
    for a in &scenario.agents {
        let v = velocity.estimate(&a.observed, dt)?;
        let p = a.last_observed();
        states.push(State {
            p,
            v,
            goal: project_goal(p, v, dt),
            speed: v.norm(),
        });
    }
    let grid = scenario
        .environment
        .as_deref()
        .and_then(|e| e.grid.as_ref())
        .filter(|g| params.obstacle_strength > 0.0 && g.has_obstacles());

    let substeps = (dt / params.sub_dt - 1e-9).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let mut tracks: Vec<Vec<crate::Vec2>> = vec![Vec::with_capacity(scenario.pred_len); states.len()];
    let mut acc = vec![Vec2::zeros(); states.len()];
    for _ in 0..scenario.pred_len {
        for _ in 0..substeps {
            for (i, a) in acc.iter_mut().enumerate() {
                *a = acceleration(i, &states, params, anticipation, grid);
            }
            for (s, a) in states.iter_mut().zip(&acc) {
                s.v += a * h;
                let cap = MAX_SPEED_FACTOR * s.speed;
                let n = s.v.norm();
                if n > cap {
                    s.v *= if n > 0.0 { cap / n } else { 0.0 };
                }
                s.p += s.v * h;
            }
        }
        for (track, s) in tracks.iter_mut().zip(&states) {
            track.push(s.p);
        }
    }

    let mut out = Prediction::default();
    for (agent, track) in scenario.agents.iter().zip(tracks) {
        if track.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(PredictError::NonFinite(agent.id));
        }
        out.agents.insert(agent.id, AgentPrediction::Points(track));
    }
    Ok(out)
}

fn acceleration(
    i: usize,
    states: &[State],
    params: &SofParams,
    anticipation: Option<&KaraParams>,
    grid: Option<&GridMap>,
) -> Vec2 {
    let me = &states[i];
    let to_goal = me.goal - me.p;
    let goal_dist = to_goal.norm();
    let goal_dir = (goal_dist > GOAL_REACHED).then(|| to_goal / goal_dist);
    let desired = goal_dir.map_or(Vec2::zeros(), |e| e * me.speed);
    let mut a = (desired - me.v) / params.tau;

    let heading = if me.v.norm() > 1e-12 {
        Some(me.v.normalize())
    } else {
        goal_dir
    };
    for (j, other) in states.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = me.p - other.p;
        let dist = d.norm();
        if dist == 0.0 {
            continue;
        }
        let n = d / dist;
        let weight = heading.map_or(1.0, |e| {
            let cos_phi = -n.dot(&e);
            params.anisotropy + (1.0 - params.anisotropy) * (1.0 + cos_phi) / 2.0
        });
        a += n * (params.agent_strength * ((2.0 * params.radius - dist) / params.agent_range).exp() * weight);
        if let Some(k) = anticipation {
            a += evasive_force(me.p, me.v, other.p, other.v, k);
        }
    }

    if let Some(grid) = grid {
        let reach = (params.radius + OBSTACLE_RANGE_CUTOFF * params.obstacle_range).min(OBSTACLE_SEARCH_LIMIT);
        if let Some(c) = grid.nearest_occupied(&me.p, reach) {
            let d = me.p - c;
            let dist = d.norm();
            if dist > 0.0 {
                a += d / dist
                    * (params.obstacle_strength * ((params.radius - dist) / params.obstacle_range).exp());
            }
        }
    }
    a
}

/// Anticipatory evasive force on agent `i` from agent `j`.
///
/// Zero when no collision is predicted within the anticipation horizon, when the agents
/// already overlap or when they move apart.
pub fn evasive_force(p_i: Vec2, v_i: Vec2, p_j: Vec2, v_j: Vec2, params: &KaraParams) -> Vec2 {
    let dp = p_i - p_j;
    let dv = v_i - v_j;
    let r2 = 2.0 * params.social.radius;
    let a = dv.norm_squared();
    let b = 2.0 * dp.dot(&dv);
    let c = dp.norm_squared() - r2 * r2;
    if a < 1e-12 || c < 0.0 || b >= 0.0 {
        return Vec2::zeros();
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec2::zeros();
    }
    let t_c = (-b - disc.sqrt()) / (2.0 * a);
    let horizon = params.anticipation_horizon;
    if !(t_c > 0.0 && t_c <= horizon) {
        return Vec2::zeros();
    }
    let t_eff = t_c.max(params.personal_distance / a.sqrt());
    let magnitude = params.evasive_strength * (horizon - t_eff).max(0.0) / (horizon * t_eff);
    let dir = dp + dv * t_c;
    let norm = dir.norm();
    if norm == 0.0 {
        return Vec2::zeros();
    }
    dir / norm * magnitude
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_map_roundtrip() {
        let p = KaraParams::default();
        assert_eq!(KaraParams::from_map(&p.to_map()).unwrap(), p);
        let s = SofParams::default();
        assert_eq!(SofParams::from_map(&s.to_map()).unwrap(), s);
    }

    #[test]
    fn unknown_and_invalid_params_rejected() {
        let mut m = ParamMap::new();
        m.insert("speed".into(), 1.0);
        assert!(SofParams::from_map(&m).is_err());
        let mut m = ParamMap::new();
        m.insert("tau".into(), 0.0);
        assert!(SofParams::from_map(&m).is_err());
        let mut m = ParamMap::new();
        m.insert("anisotropy".into(), 1.5);
        assert!(SofParams::from_map(&m).is_err());
        let mut m = ParamMap::new();
        m.insert("evasive_strength".into(), f64::NAN);
        assert!(KaraParams::from_map(&m).is_err());
    }

    #[test]
    fn defaults_inside_bounds() {
        let d = KaraParams::default().to_map();
        for b in KaraParams::bounds() {
            let v = d[&b.name];
            assert!(v >= b.min && v <= b.max, "{} = {v}", b.name);
        }
    }

    #[test]
    fn head_on_evasion_pushes_apart() {
        let p = KaraParams::default();
        let f = evasive_force(
            Vec2::new(-2.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.1),
            Vec2::new(-1.0, 0.0),
            &p,
        );
        assert!(f.x < 0.0 && f.y < 0.0, "{f:?}");
    }

    #[test]
    fn no_evasion_when_diverging_or_far_in_time() {
        let p = KaraParams::default();
        let apart = evasive_force(Vec2::new(-1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0), &p);
        assert_eq!(apart, Vec2::zeros());
        let late = evasive_force(Vec2::new(-20.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(20.0, 0.0), Vec2::new(-1.0, 0.0), &p);
        assert_eq!(late, Vec2::zeros());
        let parallel = evasive_force(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0), Vec2::new(1.0, 0.0), &p);
        assert_eq!(parallel, Vec2::zeros());
    }

    #[test]
    fn evasion_magnitude_matches_closed_form() {
        let p = KaraParams::default();
        // collision when the gap closes to 2r: (4 - 0.6) / 2 = 1.7 s
        let f = evasive_force(Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(-1.0, 0.0), &p);
        let t = 1.7;
        let expected = p.evasive_strength * (p.anticipation_horizon - t) / (p.anticipation_horizon * t);
        assert!((f.norm() - expected).abs() < 1e-12);
        assert!(f.x < 0.0 && f.y == 0.0);
    }
}
