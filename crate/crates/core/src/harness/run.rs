use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::config::{Experiment, LoadedConfig, SyntheticSource};
use super::report::{runtime_csv, seconds_key, Cell, MetricReport, RuntimeBin};
use super::{HarnessError, Stage};
use crate::bridge::{BridgeOptions, ExternalPredictor};
use crate::calibration::{calibrate, evaluate_params, split_calibration, CalibrationResult, ParamSpace};
use crate::dataset::{load_dataset, Dataset, Format};
use crate::metrics::{aggregate, score_scenario, MetricSummary, ScenarioScore, DENSITY_FLOOR};
use crate::predict::{ParamMap, Predictor, PredictorKind};
use crate::preprocess::{noise_offset, preprocess};
use crate::rng::mix_seed;
use crate::scenario::{extract_scenarios, scenario_count_by_crowd, seconds_to_frames_exact, Scenario, ScenarioSpec};
use crate::synthetic::{arc_crowd, linear_crowd, synthetic_dataset, SyntheticKind};

/// Noise levels from here on get a reliability note in the metadata.
pub const NOISE_NOTE_SIGMA: f64 = 0.2;

/// A dataset after loading and preprocessing.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    /// File path or synthetic generator.
    pub origin: String,
    pub data: Dataset,
}

/// Everything a run produced, before it is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricReport,
    pub meta: Value,
    pub runtime: Vec<RuntimeBin>,
    /// Per calibration dataset.
    pub calibrations: Vec<(String, CalibrationResult)>,
}

#[derive(Debug, Clone)]
pub struct CalibrationOutput {
    pub result: CalibrationResult,
    pub meta: Value,
}

fn stage<E: std::fmt::Display>(stage: Stage, context: impl std::fmt::Display) -> impl FnOnce(E) -> HarnessError {
    move |e| HarnessError::new(stage, format!("{context}: {e}"))
}

pub fn prepare_datasets(loaded: &LoadedConfig) -> Result<Vec<PreparedDataset>, HarnessError> {
    let cfg = &loaded.config;
    let mut out = Vec::with_capacity(cfg.datasets.len());
    for (i, src) in cfg.datasets.iter().enumerate() {
        let name = src.label(i);
        let (raw, origin) = match (&src.path, &src.synthetic) {
            (Some(p), _) => {
                let full = loaded.resolve(p);
                let format = src.format.unwrap_or_else(|| Format::from_path(&full));
                let ds = load_dataset(&full, format).map_err(stage(Stage::Load, full.display()))?;
                (ds, full.display().to_string())
            }
            (None, Some(syn)) => {
                let ds = match syn {
                    SyntheticSource::Chasing(c) => synthetic_dataset(SyntheticKind::Chasing, c),
                    SyntheticSource::Opposing(c) => synthetic_dataset(SyntheticKind::Opposing, c),
                    SyntheticSource::Crossing(c) => synthetic_dataset(SyntheticKind::Crossing, c),
                    SyntheticSource::LinearCrowd(c) => linear_crowd(c),
                    SyntheticSource::ArcCrowd(a) => arc_crowd(&a.crowd(), a.turn_rate),
                }
                .map_err(stage(Stage::Load, &name))?;
                (ds, format!("synthetic:{}", syn.kind_name()))
            }
            (None, None) => return Err(HarnessError::config(format!("dataset {name} has no source"))),
        };
        let mut data = preprocess(&raw, &cfg.preprocess).map_err(stage(Stage::Preprocess, &name))?;
        data.name = name.clone();
        out.push(PreparedDataset { name, origin, data });
    }
    Ok(out)
}

fn base_params(loaded: &LoadedConfig) -> Result<ParamMap, HarnessError> {
    let p = &loaded.config.predictor;
    let mut params = ParamMap::new();
    if let Some(file) = &p.params_file {
        let full = loaded.resolve(file);
        let text = fs::read_to_string(&full).map_err(stage(Stage::Config, full.display()))?;
        params = serde_yaml::from_str(&text).map_err(stage(Stage::Config, full.display()))?;
    }
    for (k, v) in &p.params {
        params.insert(k.clone(), *v);
    }
    Ok(params)
}

fn builtin(loaded: &LoadedConfig, what: &str) -> Result<PredictorKind, HarnessError> {
    loaded
        .config
        .predictor
        .kind
        .builtin()
        .ok_or_else(|| HarnessError::config(format!("{what} needs a built-in predictor")))
}

fn build_predictor(loaded: &LoadedConfig, params: &ParamMap) -> Result<Box<dyn Predictor>, HarnessError> {
    let p = &loaded.config.predictor;
    match p.kind.builtin() {
        Some(kind) => {
            let predictor = kind.build(params, p.velocity).map_err(stage(Stage::Config, "predictor"))?;
            Ok(predictor)
        }
        None => {
            let command = p.command.as_deref().unwrap_or_default();
            let options = BridgeOptions {
                timeout: Duration::from_secs_f64(p.timeout_s),
                handshake_timeout: Duration::from_secs_f64(p.timeout_s),
                record_transcript: false,
            };
            let ext = ExternalPredictor::spawn(command, options).map_err(stage(Stage::Predict, command))?;
            Ok(Box::new(ext))
        }
    }
}

fn extract(d: &PreparedDataset, spec: &ScenarioSpec) -> Result<Vec<Scenario>, HarnessError> {
    let s = extract_scenarios(&d.data, spec).map_err(stage(Stage::Extract, &d.name))?;
    if s.is_empty() {
        return Err(HarnessError::new(
            Stage::Extract,
            format!("{}: no scenario with at least {} agents", d.name, spec.min_agents),
        ));
    }
    Ok(s)
}

fn predict_one(predictor: &mut dyn Predictor, s: &Scenario, dataset: &str) -> Result<crate::predict::Prediction, HarnessError> {
    predictor
        .predict(s)
        .map_err(stage(Stage::Predict, format!("{dataset} anchor {}", s.anchor)))
}

fn score_one(s: &Scenario, p: &crate::predict::Prediction, dataset: &str) -> Result<ScenarioScore, HarnessError> {
    score_scenario(s, p).map_err(stage(Stage::Score, format!("{dataset} anchor {}", s.anchor)))
}

fn score_all(predictor: &mut dyn Predictor, scenarios: &[Scenario], dataset: &str) -> Result<Vec<ScenarioScore>, HarnessError> {
    scenarios
        .iter()
        .map(|s| {
            let p = predict_one(predictor, s, dataset)?;
            score_one(s, &p, dataset)
        })
        .collect()
}

fn summarize(scores: &[ScenarioScore], dataset: &str) -> Result<MetricSummary, HarnessError> {
    aggregate(scores).ok_or_else(|| HarnessError::new(Stage::Score, format!("{dataset}: nothing to score")))
}

fn frames(what: &'static str, seconds: &[f64], hz: f64) -> Result<Vec<usize>, HarnessError> {
    seconds
        .iter()
        .map(|s| seconds_to_frames_exact(what, *s, hz).map_err(|e| HarnessError::config(e.to_string())))
        .collect()
}

/// Adds position noise to the observed part of every agent; futures stay untouched.
///
/// Draws are keyed by `(seed, agent, frame)`, so a detection shared by overlapping
/// scenarios gets the same offset in each.
pub fn perturb_observations(scenarios: &[Scenario], sigma: f64, seed: u64) -> Vec<Scenario> {
    if sigma == 0.0 {
        return scenarios.to_vec();
    }
    scenarios
        .iter()
        .map(|s| {
            let mut s2 = s.clone();
            for a in &mut s2.agents {
                for (k, p) in a.observed.iter_mut().enumerate() {
                    *p += noise_offset(sigma, seed, a.id.0, s.observed_frame(k));
                }
            }
            s2
        })
        .collect()
}

fn dataset_meta(d: &PreparedDataset, spec: &ScenarioSpec, scenarios: &[Scenario]) -> Value {
    let hist: BTreeMap<String, usize> = scenario_count_by_crowd(scenarios)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    json!({
        "name": d.name,
        "origin": d.origin,
        "frequency_hz": d.data.frequency_hz,
        "detections": d.data.detection_count(),
        "agents": d.data.tracks.len(),
        "obs_len": spec.obs_len,
        "pred_len": spec.pred_len,
        "obs_s": spec.obs_seconds(d.data.frequency_hz),
        "pred_s": spec.pred_seconds(d.data.frequency_hz),
        "scenarios": scenarios.len(),
        "targets": scenarios.iter().map(Scenario::target_count).sum::<usize>(),
        "scenarios_by_agent_count": hist,
    })
}

fn resolved_params(loaded: &LoadedConfig, base: &ParamMap) -> Result<Value, HarnessError> {
    match loaded.config.predictor.kind.builtin() {
        Some(kind) => {
            let p = kind.resolve_params(base).map_err(stage(Stage::Config, "predictor"))?;
            Ok(json!(p))
        }
        None => Ok(Value::Null),
    }
}

fn base_meta(loaded: &LoadedConfig, predictor_id: &str, params: Value) -> Value {
    let cfg = &loaded.config;
    let spec = cfg.scenario.resolve();
    let bounds = match cfg.predictor.kind.builtin() {
        Some(k) => json!(cfg.calibration.bounds.clone().unwrap_or_else(|| k.default_bounds())),
        None => Value::Null,
    };
    json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "config_version": cfg.version,
        "config_hash": loaded.hash(),
        "name": cfg.name,
        "seed": cfg.seed,
        "experiment": cfg.experiment,
        "scenario": {
            "obs_len": spec.obs_len,
            "pred_len": spec.pred_len,
            "min_agents": spec.min_agents,
            "stride": spec.stride,
            "obs_s": spec.obs_seconds(cfg.preprocess.target_hz),
            "pred_s": spec.pred_seconds(cfg.preprocess.target_hz),
        },
        "preprocess": cfg.preprocess,
        "predictor": {
            "id": predictor_id,
            "kind": cfg.predictor.kind,
            "command": cfg.predictor.command,
            "params": params,
            "velocity": cfg.predictor.velocity,
            "timeout_s": cfg.predictor.timeout_s,
        },
        "calibration": {
            "budget": cfg.calibration.budget,
            "seed": cfg.calibration.seed.unwrap_or(cfg.seed),
            "refine_fraction": cfg.calibration.refine_fraction,
            "objective": cfg.calibration.objective,
            "horizon_s": cfg.calibration.horizon_s,
            "fraction": cfg.calibration.fraction,
            "bounds": bounds,
        },
        "metrics": {
            "aggregation": "mean over target agents per scenario, then mean over scenarios",
            "std": "population",
            "top_k": "minimum over samples or mixture modes; equals ADE/FDE for point predictions",
            "nlp": "mean over steps of -ln(density), density floored",
            "density_floor": DENSITY_FLOOR,
        },
    })
}

/// Runs the configured experiment without writing anything.
pub fn run_config(loaded: &LoadedConfig) -> Result<RunOutput, HarnessError> {
    let cfg = &loaded.config;
    let datasets = prepare_datasets(loaded)?;
    let spec = cfg.scenario.resolve();
    let base = base_params(loaded)?;
    let params_meta = resolved_params(loaded, &base)?;
    let mut report = MetricReport::new(cfg.experiment.name());
    let mut ds_meta = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut runtime = Vec::new();
    let mut calibrations = Vec::new();

    if cfg.experiment == Experiment::Transfer {
        let id = transfer(loaded, &datasets, &spec, &base, &mut report, &mut ds_meta, &mut calibrations)?;
        let mut meta = base_meta(loaded, &id, params_meta);
        meta["datasets"] = json!(ds_meta);
        meta["calibrated_params"] = json!(calibrations
            .iter()
            .map(|(n, r)| (n.clone(), json!(r.best_params)))
            .collect::<BTreeMap<_, _>>());
        meta["notes"] = json!(notes);
        return Ok(RunOutput {
            report,
            meta,
            runtime,
            calibrations,
        });
    }

    let mut predictor = build_predictor(loaded, &base)?;
    let pid = predictor.id();
    for d in &datasets {
        let hz = d.data.frequency_hz;
        let cell = |group: &'static str, value: String| Cell {
            dataset: &d.name,
            calibrated_on: "",
            predictor: &pid,
            group,
            group_value: value,
        };
        match &cfg.experiment {
            Experiment::Single => {
                let sc = extract(d, &spec)?;
                ds_meta.push(dataset_meta(d, &spec, &sc));
                let scores = score_all(predictor.as_mut(), &sc, &d.name)?;
                report.push_summary(&cell("all", String::new()), &summarize(&scores, &d.name)?);
            }
            Experiment::HorizonSweep { horizons_s } => {
                let hs = frames("prediction horizon", horizons_s, hz)?;
                let longest = ScenarioSpec {
                    pred_len: *hs.iter().max().expect("validated non-empty"),
                    ..spec
                };
                let sc = extract(d, &longest)?;
                ds_meta.push(dataset_meta(d, &longest, &sc));
                for h in hs {
                    let sub: Vec<Scenario> = sc.iter().map(|s| s.with_horizon(h)).collect();
                    let scores = score_all(predictor.as_mut(), &sub, &d.name)?;
                    report.push_summary(&cell("horizon_s", seconds_key(h as f64 / hz)), &summarize(&scores, &d.name)?);
                }
            }
            Experiment::ObservationSweep { observations_s } => {
                let os = frames("observation length", observations_s, hz)?;
                if let Some(o) = os.iter().find(|o| **o < 2) {
                    return Err(HarnessError::config(format!(
                        "observation length of {o} frames is below the minimum of 2"
                    )));
                }
                let longest = ScenarioSpec {
                    obs_len: *os.iter().max().expect("validated non-empty"),
                    ..spec
                };
                let sc = extract(d, &longest)?;
                ds_meta.push(dataset_meta(d, &longest, &sc));
                for o in os {
                    let sub: Vec<Scenario> = sc.iter().map(|s| s.with_observation(o)).collect();
                    let scores = score_all(predictor.as_mut(), &sub, &d.name)?;
                    report.push_summary(&cell("observation_s", seconds_key(o as f64 / hz)), &summarize(&scores, &d.name)?);
                }
            }
            Experiment::NoiseSweep { sigmas } => {
                let sc = extract(d, &spec)?;
                ds_meta.push(dataset_meta(d, &spec, &sc));
                for (i, sigma) in sigmas.iter().enumerate() {
                    let noisy = perturb_observations(&sc, *sigma, mix_seed(&[cfg.seed, i as u64]));
                    let scores = score_all(predictor.as_mut(), &noisy, &d.name)?;
                    report.push_summary(&cell("sigma", format!("{sigma}")), &summarize(&scores, &d.name)?);
                }
                if sigmas.iter().any(|s| *s >= NOISE_NOTE_SIGMA) {
                    let note = format!(
                        "noise levels of sigma >= {NOISE_NOTE_SIGMA} m make observations unreliable; \
                         accuracy at these levels reflects noise more than the predictor"
                    );
                    if !notes.contains(&note) {
                        notes.push(note);
                    }
                }
            }
            Experiment::CrowdBreakdown | Experiment::Runtime { .. } => {
                let sc = extract(d, &spec)?;
                ds_meta.push(dataset_meta(d, &spec, &sc));
                let mut bins: BTreeMap<usize, Vec<&Scenario>> = BTreeMap::new();
                for s in &sc {
                    bins.entry(s.agents.len()).or_default().push(s);
                }
                let warmup = match cfg.experiment {
                    Experiment::Runtime { warmup } => Some(warmup),
                    _ => None,
                };
                for (agents, members) in bins {
                    if let Some(w) = warmup {
                        for _ in 0..w {
                            predict_one(predictor.as_mut(), members[0], &d.name)?;
                        }
                    }
                    let mut times = Vec::with_capacity(members.len());
                    let mut scores = Vec::with_capacity(members.len());
                    for s in &members {
                        let t0 = Instant::now();
                        let p = predict_one(predictor.as_mut(), s, &d.name)?;
                        times.push(t0.elapsed().as_secs_f64());
                        scores.push(score_one(s, &p, &d.name)?);
                    }
                    report.push_summary(&cell("agents", agents.to_string()), &summarize(&scores, &d.name)?);
                    if warmup.is_some() {
                        times.sort_by(f64::total_cmp);
                        let n = times.len();
                        let median = if n % 2 == 1 {
                            times[n / 2]
                        } else {
                            (times[n / 2 - 1] + times[n / 2]) / 2.0
                        };
                        runtime.push(RuntimeBin {
                            dataset: d.name.clone(),
                            agents,
                            calls: n,
                            mean_s: times.iter().sum::<f64>() / n as f64,
                            median_s: median,
                            max_s: times[n - 1],
                        });
                    }
                }
            }
            Experiment::Transfer => unreachable!("handled above"),
        }
    }
    drop(predictor);
    let mut meta = base_meta(loaded, &pid, params_meta);
    meta["datasets"] = json!(ds_meta);
    meta["notes"] = json!(notes);
    if let Experiment::Runtime { .. } = cfg.experiment {
        meta["runtime"] = json!({
            "clock": "monotonic",
            "timed": "predict call only",
            "output": "runtime.csv",
        });
    }
    Ok(RunOutput {
        report,
        meta,
        runtime,
        calibrations,
    })
}

fn search_space(loaded: &LoadedConfig, kind: PredictorKind) -> Result<ParamSpace, HarnessError> {
    let bounds = loaded.config.calibration.bounds.clone().unwrap_or_else(|| kind.default_bounds());
    ParamSpace::new(bounds).map_err(stage(Stage::Config, "calibration bounds"))
}

fn objective_horizon(loaded: &LoadedConfig, spec: &ScenarioSpec, hz: f64) -> Result<usize, HarnessError> {
    let h = seconds_to_frames_exact("calibration horizon", loaded.config.calibration.horizon_s, hz)
        .map_err(|e| HarnessError::config(e.to_string()))?;
    if h == 0 || h > spec.pred_len {
        return Err(HarnessError::config(format!(
            "calibration horizon of {h} frames must lie within the prediction length of {}",
            spec.pred_len
        )));
    }
    Ok(h)
}

fn calibrate_on(
    loaded: &LoadedConfig,
    kind: PredictorKind,
    base: &ParamMap,
    scenarios: &[Scenario],
    horizon: usize,
    what: &str,
) -> Result<CalibrationResult, HarnessError> {
    let cfg = &loaded.config;
    let space = search_space(loaded, kind)?;
    let search = cfg.calibration.search_config(cfg.seed, horizon);
    let velocity = cfg.predictor.velocity;
    if scenarios.is_empty() {
        return Err(HarnessError::new(Stage::Calibrate, format!("{what}: no calibration scenarios")));
    }
    // bad user params should fail loudly instead of turning every trial into inf
    kind.resolve_params(base).map_err(stage(Stage::Config, "predictor"))?;
    calibrate(&space, base, &search, |p| evaluate_params(kind, p, velocity, scenarios, &search))
        .map_err(stage(Stage::Calibrate, what))
}

fn transfer(
    loaded: &LoadedConfig,
    datasets: &[PreparedDataset],
    spec: &ScenarioSpec,
    base: &ParamMap,
    report: &mut MetricReport,
    ds_meta: &mut Vec<Value>,
    calibrations: &mut Vec<(String, CalibrationResult)>,
) -> Result<String, HarnessError> {
    let cfg = &loaded.config;
    let kind = builtin(loaded, "transfer")?;
    let mut splits = Vec::with_capacity(datasets.len());
    for d in datasets {
        let (cal, hold) = split_calibration(&d.data, cfg.calibration.fraction).map_err(stage(Stage::Calibrate, &d.name))?;
        let part = |data: Dataset, suffix: &str| PreparedDataset {
            name: format!("{}/{suffix}", d.name),
            origin: d.origin.clone(),
            data,
        };
        let cal = part(cal, "calibration");
        let hold = part(hold, "holdout");
        let cal_sc = extract(&cal, spec)?;
        let hold_sc = extract(&hold, spec)?;
        ds_meta.push(dataset_meta(&cal, spec, &cal_sc));
        ds_meta.push(dataset_meta(&hold, spec, &hold_sc));
        splits.push((cal_sc, hold_sc));
    }
    let id = kind.id().to_string();
    for (i, d) in datasets.iter().enumerate() {
        let horizon = objective_horizon(loaded, spec, d.data.frequency_hz)?;
        let result = calibrate_on(loaded, kind, base, &splits[i].0, horizon, &d.name)?;
        let mut predictor = kind
            .build(&result.best_params, cfg.predictor.velocity)
            .map_err(stage(Stage::Calibrate, &d.name))?;
        for (j, test) in datasets.iter().enumerate() {
            let scores = score_all(predictor.as_mut(), &splits[j].1, &test.name)?;
            report.push_summary(
                &Cell {
                    dataset: &test.name,
                    calibrated_on: &d.name,
                    predictor: &id,
                    group: "all",
                    group_value: String::new(),
                },
                &summarize(&scores, &test.name)?,
            );
        }
        calibrations.push((d.name.clone(), result));
    }
    Ok(id)
}

/// Calibrates the configured built-in predictor on the pooled calibration splits.
pub fn calibrate_config(loaded: &LoadedConfig) -> Result<CalibrationOutput, HarnessError> {
    let cfg = &loaded.config;
    let kind = builtin(loaded, "calibration")?;
    let datasets = prepare_datasets(loaded)?;
    let spec = cfg.scenario.resolve();
    let base = base_params(loaded)?;
    let mut pooled = Vec::new();
    let mut ds_meta = Vec::new();
    let mut horizon = None;
    for d in &datasets {
        let (cal, _) = split_calibration(&d.data, cfg.calibration.fraction).map_err(stage(Stage::Calibrate, &d.name))?;
        let cal = PreparedDataset {
            name: format!("{}/calibration", d.name),
            origin: d.origin.clone(),
            data: cal,
        };
        let sc = extract(&cal, &spec)?;
        ds_meta.push(dataset_meta(&cal, &spec, &sc));
        let h = objective_horizon(loaded, &spec, d.data.frequency_hz)?;
        if horizon.is_some_and(|prev| prev != h) {
            return Err(HarnessError::config("datasets disagree on the calibration horizon in frames"));
        }
        horizon = Some(h);
        pooled.extend(sc);
    }
    let horizon = horizon.expect("at least one dataset");
    let result = calibrate_on(loaded, kind, &base, &pooled, horizon, "pooled calibration split")?;
    let mut meta = base_meta(loaded, kind.id(), json!(base));
    meta["datasets"] = json!(ds_meta);
    meta["calibration"]["best_objective"] = json!(result.best_objective);
    meta["calibration"]["default_objective"] = json!(result.default_objective);
    meta["calibrated_params"] = json!(result.best_params);
    Ok(CalibrationOutput { result, meta })
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dst = dir.join(name);
    fs::write(&tmp, contents).map_err(stage(Stage::Write, tmp.display()))?;
    fs::rename(&tmp, &dst).map_err(stage(Stage::Write, dst.display()))
}

fn meta_text(meta: &Value) -> String {
    let mut s = serde_json::to_string_pretty(meta).expect("json values serialize");
    s.push('\n');
    s
}

fn trace_text(calibrations: &[(String, CalibrationResult)]) -> String {
    let mut out = String::new();
    for (i, (name, r)) in calibrations.iter().enumerate() {
        let csv = r.trace_csv();
        for (k, line) in csv.lines().enumerate() {
            if k == 0 {
                if i == 0 {
                    out.push_str("dataset,");
                    out.push_str(line);
                    out.push('\n');
                }
                continue;
            }
            out.push_str(name);
            out.push(',');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Writes `report.csv`, `report.meta` and, when present, `runtime.csv` and
/// `calibration.trace`.
pub fn write_run(output: &RunOutput, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(stage(Stage::Write, dir.display()))?;
    write_atomic(dir, "report.csv", &output.report.to_csv())?;
    write_atomic(dir, "report.meta", &meta_text(&output.meta))?;
    if !output.runtime.is_empty() {
        let pid = output.meta["predictor"]["id"].as_str().unwrap_or_default();
        write_atomic(dir, "runtime.csv", &runtime_csv(pid, &output.runtime))?;
    }
    if !output.calibrations.is_empty() {
        write_atomic(dir, "calibration.trace", &trace_text(&output.calibrations))?;
    }
    Ok(())
}

/// Writes `calibration.trace`, `calibrated_params.yaml` and `report.meta`.
pub fn write_calibration(output: &CalibrationOutput, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(stage(Stage::Write, dir.display()))?;
    write_atomic(dir, "calibration.trace", &output.result.trace_csv())?;
    let params = serde_yaml::to_string(&output.result.best_params).map_err(stage(Stage::Write, "calibrated params"))?;
    write_atomic(dir, "calibrated_params.yaml", &params)?;
    write_atomic(dir, "report.meta", &meta_text(&output.meta))
}
