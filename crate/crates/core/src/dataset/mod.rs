//! Detection-stream datasets, goal lists and grid maps.
//!
//! Two on-disk layouts are supported:
//!
//! * [`Format::TrajnetJson`]: newline-delimited JSON records in the TrajNet++ style
//!   (`{"track": {"f": 0, "p": 1, "x": 0.0, "y": 0.0}}`), extended with optional
//!   `t` (seconds), `meta`, `goal` and `map` records.
//! * [`Format::Native`]: one `frame,time,agent_id,x,y` line per detection with `#`
//!   directive lines for metadata.
//!
//! Both are order-insensitive: records may appear in any order.

mod environment;
mod model;
mod native;
mod trajnet;

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use environment::{
    load_environment, load_environment_with_sidecar, load_goals, read_grid, write_grid_text,
    GridSidecar,
};
pub use model::{
    infer_frequency, AgentId, AgentTrack, Cell, Dataset, Detection, EnvironmentModel, GridMap,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty dataset")]
    Empty,
    #[error("duplicate detection for agent {agent} at frame {frame}")]
    DuplicateDetection { agent: i64, frame: i64 },
    #[error("non-finite value for agent {agent} at frame {frame}")]
    NonFinite { agent: i64, frame: i64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown semantic label {0}")]
    UnknownSemanticLabel(u32),
    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        DatasetError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    TrajnetJson,
    Native,
}

impl Format {
    /// Guess from the file extension: `.ndjson`/`.json` are TrajNet-style, anything else native.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ndjson" | "json" | "jsonl") => Format::TrajnetJson,
            _ => Format::Native,
        }
    }
}

impl FromStr for Format {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trajnet_json" | "trajnet" | "json" => Ok(Format::TrajnetJson),
            "native" => Ok(Format::Native),
            other => Err(DatasetError::Invalid(format!("unknown dataset format '{other}'"))),
        }
    }
}

/// Logs each distinct warning once per file.
#[derive(Debug, Default)]
pub(crate) struct OnceWarner {
    seen: BTreeSet<String>,
}

impl OnceWarner {
    pub(crate) fn warn(&mut self, path: &Path, what: &str) {
        if self.seen.insert(what.to_string()) {
            log::warn!("{}: ignoring {what}", path.display());
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let parsed = match format {
        Format::TrajnetJson => trajnet::parse(path, &text)?,
        Format::Native => native::parse(path, &text)?,
    };
    parsed.into_dataset(path)
}

pub fn write_dataset(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let map_ref = match dataset.environment.as_ref().and_then(|e| e.grid.as_ref()) {
        Some(grid) => {
            let grid_path = sidecar_grid_path(path);
            write_grid_text(grid, &grid_path)?;
            Some(MapRecord {
                path: grid_path
                    .file_name()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| grid_path.clone()),
                resolution: Some(grid.resolution),
                origin: Some([grid.origin.x, grid.origin.y]),
                labels: grid.labels.clone(),
            })
        }
        None => None,
    };
    let text = match format {
        Format::TrajnetJson => trajnet::render(dataset, map_ref.as_ref()),
        Format::Native => native::render(dataset, map_ref.as_ref()),
    };
    fs::write(path, text).map_err(|e| DatasetError::io(path, e))
}

fn sidecar_grid_path(dataset_path: &Path) -> PathBuf {
    let mut name = dataset_path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".grid.txt");
    dataset_path.with_file_name(name)
}

/// Reference from a dataset file to a grid map file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct MapRecord {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub labels: std::collections::BTreeMap<u8, String>,
}

/// Raw detection before frame/time reconciliation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawDetection {
    pub line: usize,
    pub frame: Option<i64>,
    pub time: Option<f64>,
    pub agent: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Default)]
pub(crate) struct ParsedFile {
    pub name: Option<String>,
    pub frequency_hz: Option<f64>,
    pub detections: Vec<RawDetection>,
    pub goals: Vec<[f64; 2]>,
    pub map: Option<MapRecord>,
}

impl ParsedFile {
    fn into_dataset(self, path: &Path) -> Result<Dataset, DatasetError> {
        if self.detections.is_empty() {
            return Err(DatasetError::Empty);
        }
        for raw in &self.detections {
            let finite = raw.x.is_finite() && raw.y.is_finite() && raw.time.is_none_or(f64::is_finite);
            if !finite {
                return Err(DatasetError::parse(
                    path,
                    raw.line,
                    format!("non-finite value for agent {}", raw.agent),
                ));
            }
        }
        let all_timed = self.detections.iter().all(|d| d.time.is_some());
        let all_framed = self.detections.iter().all(|d| d.frame.is_some());
        let frequency = match self.frequency_hz {
            Some(f) => Some(f),
            None if all_timed => None,
            None => {
                return Err(DatasetError::Invalid(format!(
                    "{}: records without timestamps need a declared frequency",
                    path.display()
                )))
            }
        };

        let mut detections: Vec<Detection> = Vec::with_capacity(self.detections.len());
        if all_timed && !all_framed {
            // Frames are derived from timestamps once the frequency is known.
            let hz = match frequency {
                Some(f) => f,
                None => infer_frequency_from_raw(&self.detections)?,
            };
            for raw in &self.detections {
                let time = raw.time.unwrap_or_default();
                detections.push(Detection {
                    frame: raw.frame.unwrap_or_else(|| (time * hz).round() as i64),
                    time,
                    agent: AgentId(raw.agent),
                    position: crate::Vec2::new(raw.x, raw.y),
                });
            }
            let environment = self.environment(path)?;
            return Dataset::from_detections(self.name_or(path), detections, Some(hz), environment);
        }

        for raw in &self.detections {
            let frame = raw.frame.unwrap_or_default();
            let time = match (raw.time, frequency) {
                (Some(t), _) => t,
                (None, Some(hz)) => frame as f64 / hz,
                (None, None) => unreachable!("checked above"),
            };
            detections.push(Detection {
                frame,
                time,
                agent: AgentId(raw.agent),
                position: crate::Vec2::new(raw.x, raw.y),
            });
        }
        let environment = self.environment(path)?;
        Dataset::from_detections(self.name_or(path), detections, frequency, environment)
    }

    fn name_or(&self, path: &Path) -> String {
        self.name.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    fn environment(&self, path: &Path) -> Result<Option<EnvironmentModel>, DatasetError> {
        if self.goals.is_empty() && self.map.is_none() {
            return Ok(None);
        }
        let mut env = EnvironmentModel::default();
        for g in &self.goals {
            if !(g[0].is_finite() && g[1].is_finite()) {
                return Err(DatasetError::Invalid("goal coordinates must be finite".into()));
            }
            env.goals.push(crate::Vec2::new(g[0], g[1]));
        }
        if let Some(map) = &self.map {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let grid_path = base.join(&map.path);
            let sidecar = match (map.resolution, map.origin) {
                (Some(resolution), Some(origin)) => GridSidecar {
                    resolution,
                    origin,
                    labels: map.labels.clone(),
                    ..GridSidecar::default()
                },
                _ => GridSidecar::load_for(&grid_path)?,
            };
            env.grid = Some(read_grid(&grid_path, &sidecar)?);
            env.goals.extend(sidecar.goals.iter().map(|g| crate::Vec2::new(g[0], g[1])));
            env.grid_path = Some(grid_path);
        }
        Ok(Some(env))
    }
}

fn infer_frequency_from_raw(raw: &[RawDetection]) -> Result<f64, DatasetError> {
    let mut by_agent: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for d in raw {
        by_agent.entry(d.agent).or_default().push(d.time.unwrap_or_default());
    }
    let tracks: Vec<AgentTrack> = by_agent
        .into_iter()
        .map(|(agent, mut times)| {
            times.sort_by(f64::total_cmp);
            times.dedup();
            AgentTrack {
                agent: AgentId(agent),
                detections: times
                    .into_iter()
                    .map(|time| Detection {
                        frame: 0,
                        time,
                        agent: AgentId(agent),
                        position: crate::Vec2::zeros(),
                    })
                    .collect(),
            }
        })
        .collect();
    infer_frequency(&tracks)
}
