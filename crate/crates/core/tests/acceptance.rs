//! Acceptance gate. Every criterion prints one PASS/FAIL line; the test fails if any fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajbench::calibration::{calibrate_predictor, CalibrationConfig};
use trajbench::harness::{parse_config, run_config, write_run};
use trajbench::metrics::{ade, fde, nlp_mixture, top_k};
use trajbench::predict::{
    estimate_velocity, predict_cvm, predict_karamouzas, predict_social_force, AgentPrediction, Gaussian2,
    GaussianMixtureSequence, KaraParams, Prediction, SofParams, VelocityEstimator, VelocityFilter,
};
use trajbench::scenario::{extract_scenarios, ScenarioSpec};
use trajbench::synthetic::{
    generate_synthetic, linear_crowd, synthetic_scenarios, LinearCrowdConfig, SyntheticConfig, SyntheticKind,
};
use trajbench::{AgentId, Dataset, Detection, Mat2, Scenario, Vec2};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn points(p: &Prediction, id: AgentId) -> &[Vec2] {
    match &p.agents[&id] {
        AgentPrediction::Points(v) => v,
        other => panic!("expected points, got {}", other.kind()),
    }
}

fn max_deviation(a: &Prediction, b: &Prediction) -> f64 {
    let mut worst: f64 = 0.0;
    for id in a.agents.keys() {
        for (p, q) in points(a, *id).iter().zip(points(b, *id)) {
            worst = worst.max((p - q).norm());
        }
    }
    worst
}

fn cvm_exactness() -> Outcome {
    let t0 = Instant::now();
    let text = "version: 1
datasets:
  - synthetic: {kind: linear_crowd, agents: 4, frames: 90, seed: 5}
preprocess: {smoothing_window: 1}
experiment: {kind: horizon_sweep, horizons_s: [1.6, 3.2, 4.8, 8.0]}
";
    let out = run_config(&parse_config(text, ".").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let scenarios = out.report.rows[0].scenarios;
    let worst = out
        .report
        .rows
        .iter()
        .filter(|r| r.metric == "ade" || r.metric == "fde")
        .map(|r| r.mean.abs().max(r.std))
        .fold(0.0, f64::max);
    let horizons: Vec<&str> = out.report.rows.iter().filter(|r| r.metric == "ade").map(|r| r.group_value.as_str()).collect();
    check(
        scenarios >= 50 && worst <= 1e-9 && elapsed < Duration::from_secs(5) && horizons == ["1.6", "3.2", "4.8", "8"],
        format!("{scenarios} scenarios, horizons {horizons:?}, max error {worst:.2e} m, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn brute_ade(p: &[[f64; 2]], t: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..t.len() {
        s += ((p[i][0] - t[i][0]).powi(2) + (p[i][1] - t[i][1]).powi(2)).sqrt();
    }
    s / t.len() as f64
}

fn brute_fde(p: &[[f64; 2]], t: &[[f64; 2]]) -> f64 {
    let n = t.len() - 1;
    ((p[n][0] - t[n][0]).powi(2) + (p[n][1] - t[n][1]).powi(2)).sqrt()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let v = |xs: &[[f64; 2]]| xs.iter().map(|p| Vec2::new(p[0], p[1])).collect::<Vec<_>>();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(1..=5);
        let mut draw = |n: usize| -> Vec<[f64; 2]> {
            (0..n).map(|_| [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)]).collect()
        };
        let truth = draw(n);
        let samples: Vec<Vec<[f64; 2]>> = (0..k).map(|_| draw(n)).collect();
        let t = v(&truth);
        let s: Vec<Vec<Vec2>> = samples.iter().map(|x| v(x)).collect();
        worst = worst.max((ade(&s[0], &t).unwrap() - brute_ade(&samples[0], &truth)).abs());
        worst = worst.max((fde(&s[0], &t).unwrap() - brute_fde(&samples[0], &truth)).abs());
        let mut best_a = f64::MAX;
        let mut best_f = f64::MAX;
        for x in &samples {
            let a = brute_ade(x, &truth);
            let f = brute_fde(x, &truth);
            if a < best_a {
                best_a = a;
            }
            if f < best_f {
                best_f = f;
            }
        }
        let (ta, tf) = top_k(&s, &t).unwrap();
        worst = worst.max((ta - best_a).abs()).max((tf - best_f).abs());
    }
    let geometric = worst;

    let mut nlp_worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut modes = Vec::new();
        let mut plain = Vec::new();
        for _ in 0..3 {
            let mut mode = Vec::new();
            let mut pm = Vec::new();
            for _ in 0..n {
                let (sx, sy) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
                let rho: f64 = rng.random_range(-0.9..0.9);
                let (a, b, d) = (sx * sx, rho * sx * sy, sy * sy);
                let mu = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                mode.push(Gaussian2::new(Vec2::new(mu[0], mu[1]), Mat2::new(a, b, b, d)).unwrap());
                pm.push((mu, a, b, d));
            }
            modes.push(mode);
            plain.push(pm);
        }
        let truth: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
        let mut direct = 0.0;
        for (t, x) in truth.iter().enumerate() {
            let mut p = 0.0;
            for m in 0..3 {
                let (mu, a, b, d) = plain[m][t];
                let det = a * d - b * b;
                let (dx, dy) = (x[0] - mu[0], x[1] - mu[1]);
                let q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
                p += weights[m] * (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
            }
            direct += -p.max(1e-12).ln();
        }
        direct /= n as f64;
        let mix = GaussianMixtureSequence { weights, modes };
        nlp_worst = nlp_worst.max((nlp_mixture(&mix, &v(&truth)) - direct).abs());
    }
    check(
        geometric <= 1e-12 && nlp_worst <= 1e-9,
        format!("ADE/FDE/top-k max diff {geometric:.2e} over 1000 pairs, NLP max diff {nlp_worst:.2e} over 100 mixtures"),
    )
}

fn nlp_analytic() -> Outcome {
    let g = Gaussian2::new(Vec2::new(1.0, -2.0), Mat2::identity()).unwrap();
    let mix = GaussianMixtureSequence {
        weights: vec![1.0],
        modes: vec![vec![g; 5]],
    };
    let v = nlp_mixture(&mix, &[Vec2::new(1.0, -2.0); 5]);
    let expected = (2.0 * std::f64::consts::PI).ln();
    check((v - expected).abs() <= 1e-9, format!("NLP {v:.12} vs ln(2 pi) {expected:.12}"))
}

fn three_agent_fixture() -> Dataset {
    let mut dets = Vec::new();
    for (id, range) in [(1, 0..=30), (2, 0..=10), (3, 15..=30)] {
        for f in range {
            dets.push(Detection {
                frame: f,
                time: f as f64 * 0.4,
                agent: AgentId(id),
                position: Vec2::new(f as f64 * 0.4, id as f64),
            });
        }
    }
    Dataset::from_detections("fixture", dets, Some(2.5), None).unwrap()
}

fn scenario_enumeration() -> Outcome {
    let s = extract_scenarios(&three_agent_fixture(), &ScenarioSpec::default()).map_err(|e| e.to_string())?;
    let anchors: Vec<i64> = s.iter().map(|s| s.anchor).collect();
    let sole_a = s
        .iter()
        .all(|s| s.targets().map(|t| t.id).collect::<Vec<_>>() == [AgentId(1)]);
    check(
        anchors == [7, 8, 9, 10] && sole_a,
        format!("anchors {anchors:?}, A sole target: {sole_a}"),
    )
}

fn velocity_filter() -> Outcome {
    let f = VelocityFilter::default();
    let w = f.weights(7);
    let raw: Vec<f64> = (1..=7).map(|t| (-(t * t) as f64 / 4.5).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weight_err = w.iter().zip(&raw).map(|(a, b)| (a - b / total).abs()).fold(0.0, f64::max);
    let mut vel_err: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let v = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let p0 = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let obs: Vec<Vec2> = (0..8).map(|k| p0 + v * (k as f64 * 0.4)).collect();
        let est = estimate_velocity(&obs, 0.4, &f).unwrap();
        vel_err = vel_err.max((est - v).norm());
    }
    check(
        weight_err <= 1e-12 && vel_err <= 1e-12,
        format!("weight error {weight_err:.2e}, constant-velocity recovery error {vel_err:.2e}"),
    )
}

fn single_agent(s: &Scenario) -> Scenario {
    let mut s = s.clone();
    s.agents.truncate(1);
    s
}

fn transform(s: &Scenario, angle: f64, shift: Vec2) -> Scenario {
    let r = nalgebra::Rotation2::new(angle);
    let mut out = s.clone();
    for a in &mut out.agents {
        for p in a.observed.iter_mut().chain(a.future.iter_mut()) {
            *p = r * *p + shift;
        }
    }
    out
}

fn force_reductions() -> Outcome {
    let vel = VelocityEstimator::default();
    let sof = SofParams::default();
    let kara = KaraParams::default();
    let cfg = SyntheticConfig::default();
    let fixtures: Vec<Scenario> = SyntheticKind::ALL.iter().map(|k| generate_synthetic(*k, &cfg).unwrap()).collect();

    let mut single: f64 = 0.0;
    let crowd = linear_crowd(&LinearCrowdConfig {
        agents: 6,
        frames: 40,
        ..Default::default()
    })
    .unwrap();
    let mut singles: Vec<Scenario> = fixtures.iter().map(single_agent).collect();
    singles.extend(extract_scenarios(&crowd, &ScenarioSpec::default()).unwrap().iter().map(single_agent));
    for s in &singles {
        let cvm = predict_cvm(s, &vel).unwrap();
        single = single
            .max(max_deviation(&cvm, &predict_social_force(s, &sof, &vel).unwrap()))
            .max(max_deviation(&cvm, &predict_karamouzas(s, &kara, &vel).unwrap()));
    }

    let mut halving: f64 = 0.0;
    for s in &fixtures {
        let half_sof = SofParams {
            sub_dt: sof.sub_dt / 2.0,
            ..sof
        };
        let half_kara = KaraParams {
            social: half_sof,
            ..kara
        };
        halving = halving
            .max(max_deviation(
                &predict_social_force(s, &sof, &vel).unwrap(),
                &predict_social_force(s, &half_sof, &vel).unwrap(),
            ))
            .max(max_deviation(
                &predict_karamouzas(s, &kara, &vel).unwrap(),
                &predict_karamouzas(s, &half_kara, &vel).unwrap(),
            ));
    }

    let mut equi: f64 = 0.0;
    let r = nalgebra::Rotation2::new(0.7);
    let shift = Vec2::new(12.5, -3.25);
    for s in &fixtures {
        let moved = transform(s, 0.7, shift);
        for (a, b) in [
            (predict_social_force(s, &sof, &vel).unwrap(), predict_social_force(&moved, &sof, &vel).unwrap()),
            (predict_karamouzas(s, &kara, &vel).unwrap(), predict_karamouzas(&moved, &kara, &vel).unwrap()),
        ] {
            for id in a.agents.keys() {
                for (p, q) in points(&a, *id).iter().zip(points(&b, *id)) {
                    equi = equi.max((r * p + shift - q).norm());
                }
            }
        }
    }
    check(
        single <= 1e-6 && halving < 0.05 && equi <= 1e-9,
        format!(
            "single-agent vs CVM {single:.2e} m over {} scenarios, sub_dt halving {:.2} cm, rigid transform {equi:.2e} m",
            singles.len(),
            halving * 100.0
        ),
    )
}

const LINEAR_200: &str = "version: 1
seed: 17
datasets:
  - synthetic: {kind: linear_crowd, agents: 3, frames: 219, seed: 3}
preprocess: {smoothing_window: 1}
";

fn noise_monotonicity() -> Outcome {
    let sweep = format!("{LINEAR_200}experiment: {{kind: noise_sweep, sigmas: [0.0, 0.05, 0.1, 0.2, 0.4]}}\n");
    let noisy = run_config(&parse_config(&sweep, ".").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let clean = run_config(&parse_config(LINEAR_200, ".").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ades: Vec<f64> = noisy.report.rows.iter().filter(|r| r.metric == "ade").map(|r| r.mean).collect();
    let scenarios = noisy.report.rows[0].scenarios;
    let monotone = ades.windows(2).all(|w| w[1] >= w[0]);
    let zero_rows: Vec<(f64, f64)> = noisy
        .report
        .rows
        .iter()
        .filter(|r| r.group_value == "0")
        .map(|r| (r.mean, r.std))
        .collect();
    let clean_rows: Vec<(f64, f64)> = clean.report.rows.iter().map(|r| (r.mean, r.std)).collect();
    let bit_equal = zero_rows.len() == clean_rows.len()
        && zero_rows
            .iter()
            .zip(&clean_rows)
            .all(|(a, b)| a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits());
    let note = noisy.meta["notes"].as_array().is_some_and(|n| !n.is_empty());
    check(
        scenarios >= 200 && monotone && bit_equal && note,
        format!("{scenarios} scenarios, mean ADE {ades:.4?}, sigma=0 bit-equal: {bit_equal}, reliability note: {note}"),
    )
}

fn calibration_contract() -> Outcome {
    let t0 = Instant::now();
    let fixture = SyntheticConfig {
        episodes: 8,
        noise_sigma: 0.1,
        seed: 21,
        ..Default::default()
    };
    let scenarios = synthetic_scenarios(SyntheticKind::Crossing, &fixture).map_err(|e| e.to_string())?;
    let cfg = CalibrationConfig {
        budget: 50,
        seed: 4,
        ..Default::default()
    };
    let kind = trajbench::predict::PredictorKind::SocialForce;
    let vel = VelocityEstimator::default();
    let a = calibrate_predictor(kind, vel, &scenarios, &cfg).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let b = calibrate_predictor(kind, vel, &scenarios, &cfg).map_err(|e| e.to_string())?;
    let monotone = a.trace.windows(2).all(|w| w[1].incumbent <= w[0].incumbent);
    let same = a.trace.len() == b.trace.len() && a.trace.iter().zip(&b.trace).all(|(x, y)| x.same_outcome(y));
    let bounds = kind.default_bounds();
    let in_bounds = a.trace.iter().all(|t| {
        bounds
            .iter()
            .all(|bd| t.params[&bd.name] >= bd.min && t.params[&bd.name] <= bd.max)
    });
    check(
        monotone && same && in_bounds && a.trace.len() == 50 && a.best_objective <= a.default_objective && elapsed < Duration::from_secs(60),
        format!(
            "FDE {:.4} m -> {:.4} m over {} trials on {} scenarios, deterministic: {same}, {:.1} s",
            a.default_objective,
            a.best_objective,
            a.trace.len(),
            scenarios.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let text = "version: 1
seed: 99
datasets:
  - synthetic: {kind: crossing, episodes: 4, noise_sigma: 0.05, seed: 2}
  - synthetic: {kind: linear_crowd, agents: 5, frames: 60}
predictor: {kind: karamouzas}
experiment: {kind: noise_sweep, sigmas: [0.0, 0.1]}
";
    let loaded = parse_config(text, ".").map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dir in [a.path(), b.path()] {
        let out = run_config(&loaded).map_err(|e| e.to_string())?;
        write_run(&out, dir).map_err(|e| e.to_string())?;
    }
    let ra = std::fs::read(a.path().join("report.csv")).map_err(|e| e.to_string())?;
    let rb = std::fs::read(b.path().join("report.csv")).map_err(|e| e.to_string())?;
    let ma = std::fs::read(a.path().join("report.meta")).map_err(|e| e.to_string())?;
    let mb = std::fs::read(b.path().join("report.meta")).map_err(|e| e.to_string())?;
    check(
        ra == rb && ma == mb && !ra.is_empty(),
        format!("report.csv {} bytes identical: {}, report.meta identical: {}", ra.len(), ra == rb, ma == mb),
    )
}

fn runtime_profile() -> Outcome {
    let ds = linear_crowd(&LinearCrowdConfig {
        agents: 20,
        frames: 20,
        extent: 8.0,
        ..Default::default()
    })
    .unwrap();
    let s = &extract_scenarios(&ds, &ScenarioSpec::default()).unwrap()[0];
    let s = Arc::new(s.clone());
    let vel = VelocityEstimator::default();
    let params = SofParams::default();
    for _ in 0..3 {
        predict_social_force(&s, &params, &vel).unwrap();
    }
    let mut times: Vec<f64> = (0..15)
        .map(|_| {
            let t0 = Instant::now();
            let p = predict_social_force(&s, &params, &vel).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            assert_eq!(p.agents.len(), 20);
            dt
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    check(
        s.agents.len() == 20 && s.pred_len == 12 && median < 0.010,
        format!("median {:.3} ms per 20-agent, 12-frame prediction", median * 1e3),
    )
}

/// Optional: `TRAJBENCH_ATC=<file>` enables a comparison against the published CVM accuracy.
fn atc_reference() -> Option<Outcome> {
    let path = std::env::var("TRAJBENCH_ATC").ok()?;
    let text = format!("version: 1\ndatasets:\n  - path: {path}\n");
    let run = || -> Result<f64, String> {
        let out = run_config(&parse_config(&text, ".").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        out.report.rows.iter().find(|r| r.metric == "ade").map(|r| r.mean).ok_or("no rows".to_string())
    };
    Some(run().and_then(|ade| {
        check(
            (ade - 0.499).abs() <= 0.2 * 0.499,
            format!("CVM ADE {ade:.3} m vs 0.499 m reference (informational)"),
        )
    }))
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("cvm_exactness", cvm_exactness),
        ("metric_oracle_equivalence", metric_oracles),
        ("nlp_analytic", nlp_analytic),
        ("scenario_enumeration", scenario_enumeration),
        ("velocity_filter", velocity_filter),
        ("force_model_reductions", force_reductions),
        ("noise_monotonicity", noise_monotonicity),
        ("calibration_contract", calibration_contract),
        ("determinism", determinism),
        ("runtime_profile", runtime_profile),
    ];
    let mut stderr = std::io::stderr();
    let mut failed = BTreeMap::new();
    for (name, f) in criteria {
        match f() {
            Ok(detail) => {
                let _ = writeln!(stderr, "PASS {name}: {detail}");
            }
            Err(detail) => {
                let _ = writeln!(stderr, "FAIL {name}: {detail}");
                failed.insert(name, detail);
            }
        }
    }
    match atc_reference() {
        None => {
            let _ = writeln!(stderr, "SKIP atc_reference (informational): set TRAJBENCH_ATC to a dataset file");
        }
        Some(Ok(d)) => {
            let _ = writeln!(stderr, "PASS atc_reference (informational): {d}");
        }
        Some(Err(d)) => {
            let _ = writeln!(stderr, "FAIL atc_reference (informational, not gating): {d}");
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
