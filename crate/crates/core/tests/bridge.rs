use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use trajbench::bridge::{
    protocol_check, BridgeError, BridgeOptions, DecodeError, Direction, ExternalPredictor, Message, WireScenario,
};
use trajbench::predict::{predict_cvm, AgentPrediction, PredictionError, VelocityEstimator};
use trajbench::scenario::{extract_scenarios, ScenarioSpec};
use trajbench::synthetic::{arc_crowd, generate_synthetic, LinearCrowdConfig, SyntheticConfig, SyntheticKind};
use trajbench::Scenario;

fn adapter(mode: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/adapter.py");
    format!("python3 {} {mode}", path.display())
}

fn fast() -> BridgeOptions {
    BridgeOptions {
        timeout: Duration::from_millis(500),
        handshake_timeout: Duration::from_secs(10),
        record_transcript: false,
    }
}

fn opposing() -> Scenario {
    generate_synthetic(SyntheticKind::Opposing, &SyntheticConfig::default()).unwrap()
}

#[test]
fn handshake_reports_version_and_points() {
    let p = ExternalPredictor::spawn(&adapter("linear"), BridgeOptions::default()).unwrap();
    assert_eq!(p.name(), Some("linear"));
    assert_eq!(p.capabilities(), ["points".to_string()]);
    p.shutdown().unwrap();
}

#[test]
fn linear_adapter_matches_single_difference_cvm() {
    let cfg = LinearCrowdConfig {
        agents: 4,
        frames: 119,
        seed: 11,
        ..Default::default()
    };
    let ds = arc_crowd(&cfg, 0.25).unwrap();
    let scenarios = extract_scenarios(&ds, &ScenarioSpec::default()).unwrap();
    assert_eq!(scenarios.len(), 100);
    let mut p = ExternalPredictor::spawn(&adapter("linear"), BridgeOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for s in &scenarios {
        let ext = p.request(s).unwrap();
        let own = predict_cvm(s, &VelocityEstimator::LastDifference).unwrap();
        for (id, a) in &own.agents {
            let (AgentPrediction::Points(x), AgentPrediction::Points(y)) = (a, &ext.agents[id]) else {
                panic!("expected points");
            };
            for (u, v) in x.iter().zip(y) {
                worst = worst.max((u - v).norm());
            }
        }
    }
    assert!(worst < 1e-9, "max deviation {worst}");
}

#[test]
fn probabilistic_representations_parse() {
    let s = opposing();
    let mut p = ExternalPredictor::spawn(&adapter("samples3"), fast()).unwrap();
    match &p.request(&s).unwrap().agents.values().next().unwrap() {
        AgentPrediction::Samples(k) => assert_eq!(k.len(), 3),
        other => panic!("got {}", other.kind()),
    }
    let mut p = ExternalPredictor::spawn(&adapter("mixture"), fast()).unwrap();
    assert_eq!(p.request(&s).unwrap().agents.values().next().unwrap().kind(), "mixture");
    let mut p = ExternalPredictor::spawn(&adapter("grid"), fast()).unwrap();
    assert_eq!(p.request(&s).unwrap().agents.values().next().unwrap().kind(), "grid");
}

#[test]
fn unnormalized_mixture_rejected() {
    let mut p = ExternalPredictor::spawn(&adapter("bad_weights"), fast()).unwrap();
    let err = p.request(&opposing()).unwrap_err();
    match err.root() {
        BridgeError::Invalid(DecodeError::Invalid {
            source: PredictionError::MixtureWeights(w),
            ..
        }) => assert!((w - 0.8).abs() < 1e-12),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn nonexistent_command_is_a_spawn_error() {
    let err = ExternalPredictor::spawn("definitely-not-a-command-xyz", fast()).err().unwrap();
    assert!(matches!(err, BridgeError::Spawn(_)), "{err}");
}

#[test]
fn slow_adapter_times_out_and_is_killed() {
    let mut p = ExternalPredictor::spawn(&adapter("hang"), fast()).unwrap();
    let t0 = Instant::now();
    let err = p.request(&opposing()).unwrap_err();
    assert!(t0.elapsed() < Duration::from_secs(5));
    assert!(matches!(err, BridgeError::Request { id: 1, .. }), "{err}");
    assert!(matches!(err.root(), BridgeError::Timeout { stage: "predict", .. }), "{err}");
    assert!(matches!(p.request(&opposing()).unwrap_err().root(), BridgeError::Dead));
}

#[test]
fn silent_handshake_times_out() {
    let opts = BridgeOptions {
        handshake_timeout: Duration::from_millis(300),
        ..fast()
    };
    let err = ExternalPredictor::spawn(&adapter("hang_hello"), opts).err().unwrap();
    assert!(matches!(err, BridgeError::Timeout { stage: "handshake", .. }), "{err}");
}

#[test]
fn crash_mid_request_is_structured() {
    let mut p = ExternalPredictor::spawn(&adapter("crash"), fast()).unwrap();
    let err = p.request(&opposing()).unwrap_err();
    assert!(matches!(err, BridgeError::Request { id: 1, .. }));
    match err.root() {
        BridgeError::ChildExited { stderr, .. } => assert!(stderr.contains("crashed on purpose"), "{stderr}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn garbage_response_is_structured() {
    let mut p = ExternalPredictor::spawn(&adapter("garbage"), fast()).unwrap();
    let err = p.request(&opposing()).unwrap_err();
    match err.root() {
        BridgeError::Json { line, .. } => assert_eq!(line, "this is not json"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn adapter_errors_and_protocol_violations() {
    let mut p = ExternalPredictor::spawn(&adapter("error"), fast()).unwrap();
    assert!(matches!(p.request(&opposing()).unwrap_err().root(), BridgeError::Adapter(m) if m == "model not loaded"));
    let mut p = ExternalPredictor::spawn(&adapter("wrong_id"), fast()).unwrap();
    assert!(matches!(p.request(&opposing()).unwrap_err().root(), BridgeError::Protocol(_)));
    let err = ExternalPredictor::spawn(&adapter("version2"), fast()).err().unwrap();
    assert!(matches!(err, BridgeError::Version(2)));
}

#[test]
fn protocol_check_over_fixtures() {
    let probes: Vec<Scenario> = SyntheticKind::ALL
        .iter()
        .map(|k| generate_synthetic(*k, &SyntheticConfig::default()).unwrap())
        .collect();
    let r = protocol_check(&adapter("linear"), fast(), &probes).unwrap();
    assert_eq!(r.representations, vec!["points"; 3]);
    assert!(protocol_check(&adapter("bad_weights"), fast(), &probes).is_err());
}

#[test]
fn golden_transcript() {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/protocol_transcript.txt");
    let opts = BridgeOptions {
        record_transcript: true,
        ..BridgeOptions::default()
    };
    let mut p = ExternalPredictor::spawn(&adapter("linear"), opts).unwrap();
    p.request(&opposing()).unwrap();
    let text: String = p
        .transcript()
        .unwrap()
        .iter()
        .map(|(d, line)| {
            let arrow = match d {
                Direction::ToAdapter => '>',
                Direction::FromAdapter => '<',
            };
            format!("{arrow} {line}\n")
        })
        .collect();
    let text = format!("{text}> {}\n", Message::Shutdown.to_line());
    if std::env::var_os("TRAJBENCH_BLESS").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden transcript present");
    assert_eq!(text, expected);
    for line in expected.lines() {
        let msg: Message = serde_json::from_str(&line[2..]).unwrap();
        assert_eq!(msg.to_line(), line[2..]);
    }
}

proptest! {
    #[test]
    fn scenario_positions_survive_the_wire(xs in proptest::collection::vec(-1e4f64..1e4, 4..16)) {
        let cfg = SyntheticConfig::default();
        let mut s = generate_synthetic(SyntheticKind::Crossing, &cfg).unwrap();
        for (p, x) in s.agents[0].observed.iter_mut().zip(&xs) {
            p.x = *x;
            p.y = x / 3.0;
        }
        let wire = WireScenario::from_scenario(&s);
        let line = Message::Predict { id: 1, scenario: wire.clone() }.to_line();
        let back: Message = serde_json::from_str(&line).unwrap();
        let Message::Predict { scenario, .. } = back else { panic!() };
        prop_assert_eq!(scenario, wire);
    }
}
