//! Benchmarking toolkit for human trajectory prediction.
//!
//! The pipeline is: load a detection stream ([`dataset`]), clean and resample it
//! ([`preprocess`]), cut it into fully observed testing scenarios ([`scenario`]), run a
//! predictor ([`predict`], or an out-of-process one through [`bridge`]), and score the
//! results ([`metrics`]). [`calibration`] tunes predictor hyperparameters and
//! [`harness`] ties everything together into configurable experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod calibration;
pub mod dataset;
pub mod harness;
pub mod metrics;
pub mod predict;
pub mod preprocess;
pub mod rng;
pub mod scenario;
pub mod synthetic;

/// 2D position or velocity in world coordinates (meters, m/s).
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 covariance matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;

pub use dataset::{AgentId, AgentTrack, Dataset, Detection, EnvironmentModel, GridMap};
pub use scenario::{Scenario, ScenarioSpec};
