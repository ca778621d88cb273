use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use trajbench::bridge::{protocol_check, BridgeOptions};
use trajbench::dataset::{load_dataset, write_dataset, Format};
use trajbench::harness::{calibrate_config, load_config, run_config, write_calibration, write_run, LoadedConfig};
use trajbench::preprocess::{preprocess, PreprocessConfig};
use trajbench::scenario::{extract_scenarios, scenario_count_by_crowd, ScenarioSpec};
use trajbench::synthetic::{generate_synthetic, synthetic_dataset, SyntheticConfig, SyntheticKind};

/// Benchmark human trajectory predictors on recorded or synthetic pedestrian data
#[derive(Parser, Debug)]
#[command(name = "trajbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a YAML config
    Run {
        config: PathBuf,
        /// Overrides the configured predictor: cvm, social_force, karamouzas or external:<command>
        #[arg(long)]
        predictor: Option<String>,
        /// Output directory (default: the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the configured predictor on the calibration split of every dataset
    Calibrate {
        config: PathBuf,
        #[arg(long)]
        predictor: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured trial budget
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Write a synthetic interaction fixture (chasing, opposing, crossing) as a dataset
    Synthetic {
        kind: String,
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
        /// native or trajnet (default: from the file extension)
        #[arg(long)]
        format: Option<String>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Position noise per axis, m
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lateral offset of the opposing agent, m
        #[arg(long, default_value_t = 0.2)]
        y_offset: f64,
    },
    /// Summarize a dataset file and the scenarios it yields
    Inspect {
        dataset: PathBuf,
        #[arg(long)]
        format: Option<String>,
        /// Scenario settings: default or eth
        #[arg(long, default_value = "default")]
        preset: String,
        /// Inspect the raw file instead of the preprocessed data
        #[arg(long)]
        raw: bool,
    },
    /// Check that an external predictor speaks the wire protocol
    ProtocolCheck {
        command: String,
        /// Per-request timeout, s
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, predictor, out } => {
            let loaded = configure(&config, predictor.as_deref(), None)?;
            let dir = out.unwrap_or_else(|| loaded.output_dir());
            let output = run_config(&loaded)?;
            write_run(&output, &dir)?;
            println!(
                "{}: {} rows written to {}",
                loaded.config.experiment.name(),
                output.report.rows.len(),
                dir.join("report.csv").display()
            );
            Ok(())
        }
        Command::Calibrate {
            config,
            predictor,
            out,
            budget,
        } => {
            let loaded = configure(&config, predictor.as_deref(), budget)?;
            let dir = out.unwrap_or_else(|| loaded.output_dir());
            let output = calibrate_config(&loaded)?;
            write_calibration(&output, &dir)?;
            let r = &output.result;
            println!(
                "best objective {:.6} (defaults {:.6}) after {} trials",
                r.best_objective,
                r.default_objective,
                r.trace.len()
            );
            for (k, v) in &r.best_params {
                println!("  {k}: {v}");
            }
            println!("parameters written to {}", dir.join("calibrated_params.yaml").display());
            Ok(())
        }
        Command::Synthetic {
            kind,
            out,
            format,
            episodes,
            noise,
            seed,
            y_offset,
        } => {
            let kind: SyntheticKind = kind.parse().map_err(|e| anyhow!("[config] {e}"))?;
            let cfg = SyntheticConfig {
                episodes,
                noise_sigma: noise,
                seed,
                y_offset,
                ..SyntheticConfig::default()
            };
            let ds = synthetic_dataset(kind, &cfg).map_err(|e| anyhow!("[config] {e}"))?;
            let format = dataset_format(format.as_deref(), &out)?;
            write_dataset(&ds, &out, format).map_err(|e| anyhow!("[write] {e}"))?;
            let s = generate_synthetic(kind, &cfg).map_err(|e| anyhow!("[config] {e}"))?;
            println!(
                "{}: {} episode(s), {} detections at {} Hz, anchor frame {} -> {}",
                kind.name(),
                episodes,
                ds.detection_count(),
                ds.frequency_hz,
                s.anchor,
                out.display()
            );
            Ok(())
        }
        Command::Inspect {
            dataset,
            format,
            preset,
            raw,
        } => inspect(&dataset, format.as_deref(), &preset, raw),
        Command::ProtocolCheck { command, timeout } => {
            if !(timeout > 0.0 && timeout.is_finite()) {
                return Err(anyhow!("[config] timeout must be > 0"));
            }
            let options = BridgeOptions {
                timeout: Duration::from_secs_f64(timeout),
                handshake_timeout: Duration::from_secs_f64(timeout),
                record_transcript: false,
            };
            let cfg = SyntheticConfig::default();
            let probes = SyntheticKind::ALL
                .iter()
                .map(|k| generate_synthetic(*k, &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let report = protocol_check(&command, options, &probes).map_err(|e| anyhow!("[protocol] {e}"))?;
            println!("adapter: {}", report.name.as_deref().unwrap_or("(unnamed)"));
            println!("capabilities: {}", report.capabilities.join(", "));
            for (k, r) in SyntheticKind::ALL.iter().zip(&report.representations) {
                println!("  {}: ok ({r})", k.name());
            }
            println!("protocol check passed");
            Ok(())
        }
    }
}

fn configure(path: &Path, predictor: Option<&str>, budget: Option<usize>) -> Result<LoadedConfig> {
    let mut loaded = load_config(path)?;
    if let Some(sel) = predictor {
        loaded.config.predictor.select(sel)?;
    }
    if let Some(b) = budget {
        loaded.config.calibration.budget = b;
    }
    loaded.validate()?;
    Ok(loaded)
}

fn dataset_format(format: Option<&str>, path: &Path) -> Result<Format> {
    match format {
        Some(f) => f.parse().map_err(|e| anyhow!("[config] {e}")),
        None => Ok(Format::from_path(path)),
    }
}

fn inspect(path: &Path, format: Option<&str>, preset: &str, raw: bool) -> Result<()> {
    let spec = match preset {
        "default" => ScenarioSpec::default(),
        "eth" => ScenarioSpec::eth_preset(),
        other => return Err(anyhow!("[config] unknown preset '{other}' (expected default or eth)")),
    };
    let format = dataset_format(format, path)?;
    let loaded = load_dataset(path, format).map_err(|e| anyhow!("[load] {e}"))?;
    let ds = if raw {
        loaded
    } else {
        preprocess(&loaded, &PreprocessConfig::default()).map_err(|e| anyhow!("[preprocess] {e}"))?
    };
    println!("name: {}", ds.name);
    println!("frequency: {} Hz", ds.frequency_hz);
    println!("agents: {}", ds.tracks.len());
    println!("detections: {}", ds.detection_count());
    if let (Some((f0, f1)), Some((t0, t1))) = (ds.frame_range(), ds.time_range()) {
        println!("frames: {f0}..={f1}");
        println!("time: {t0:.3}..={t1:.3} s");
    }
    if let Some(env) = &ds.environment {
        if let Some(g) = &env.grid {
            println!(
                "map: {}x{} cells at {} m, origin ({}, {})",
                g.width, g.height, g.resolution, g.origin.x, g.origin.y
            );
        }
        if !env.goals.is_empty() {
            println!("goals: {}", env.goals.len());
        }
    }
    let scenarios = extract_scenarios(&ds, &spec).context("[extract]")?;
    println!(
        "scenarios (obs {} / pred {} frames, >= {} agents, stride {}): {}",
        spec.obs_len,
        spec.pred_len,
        spec.min_agents,
        spec.stride,
        scenarios.len()
    );
    for (n, count) in scenario_count_by_crowd(&scenarios) {
        println!("  {n} agents: {count}");
    }
    Ok(())
}
