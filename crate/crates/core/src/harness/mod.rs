//! Experiment orchestration: configuration, sweeps and report emission.
//!
//! A run loads every configured dataset, preprocesses it, extracts scenarios, predicts and
//! scores them, and writes `report.csv` (metric rows), `report.meta` (JSON with every
//! protocol setting needed to rerun) and, where applicable, `calibration.trace` and
//! `runtime.csv` into the output directory.

mod config;
mod report;
mod run;

use std::fmt;

pub use config::{
    load_config, ArcCrowdSource, parse_config, CalibrationSection, DatasetSource, Experiment, ExperimentConfig, LoadedConfig,
    PredictorChoice, PredictorConfig, ScenarioConfig, ScenarioPreset, SyntheticSource, CONFIG_VERSION,
};
pub use report::{runtime_csv, seconds_key, Cell, MetricReport, ReportRow, RuntimeBin, CSV_HEADER};
pub use run::{
    calibrate_config, perturb_observations, prepare_datasets, run_config, write_calibration, write_run,
    CalibrationOutput, PreparedDataset, RunOutput, NOISE_NOTE_SIGMA,
};

/// Pipeline stage an error originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Preprocess,
    Extract,
    Calibrate,
    Predict,
    Score,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::Extract => "extract",
            Stage::Calibrate => "calibrate",
            Stage::Predict => "predict",
            Stage::Score => "score",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct HarnessError {
    pub stage: Stage,
    pub message: String,
}

impl HarnessError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, message)
    }
}
