use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::Vec2;

/// Original agent identifier as it appears in the source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub i64);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One labelled position of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: i64,
    /// Seconds.
    pub time: f64,
    pub agent: AgentId,
    /// World frame, meters.
    pub position: Vec2,
}

/// All detections of a single agent, ordered by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub agent: AgentId,
    pub detections: Vec<Detection>,
}

impl AgentTrack {
    /// Builds a track, sorting detections and checking the per-track invariants.
    pub fn new(agent: AgentId, mut detections: Vec<Detection>) -> Result<Self, DatasetError> {
        detections.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.time.total_cmp(&b.time)));
        for d in &detections {
            if d.agent != agent {
                return Err(DatasetError::Invalid(format!(
                    "detection of agent {} placed in track of agent {agent}",
                    d.agent
                )));
            }
            if !(d.position.x.is_finite() && d.position.y.is_finite() && d.time.is_finite()) {
                return Err(DatasetError::NonFinite {
                    agent: agent.0,
                    frame: d.frame,
                });
            }
        }
        for pair in detections.windows(2) {
            if pair[0].frame == pair[1].frame {
                return Err(DatasetError::DuplicateDetection {
                    agent: agent.0,
                    frame: pair[0].frame,
                });
            }
            if pair[1].time <= pair[0].time {
                return Err(DatasetError::Invalid(format!(
                    "agent {agent}: timestamps not strictly increasing at frame {}",
                    pair[1].frame
                )));
            }
        }
        Ok(Self { agent, detections })
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.detections.first().map(|d| d.frame)
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.detections.last().map(|d| d.frame)
    }

    /// Index of the detection at `frame`, if any.
    pub fn index_of_frame(&self, frame: i64) -> Option<usize> {
        self.detections.binary_search_by_key(&frame, |d| d.frame).ok()
    }

    /// Positions for the contiguous frame range `start..=end`, or `None` if any frame is missing.
    pub fn window(&self, start: i64, end: i64) -> Option<Vec<Vec2>> {
        let first = self.index_of_frame(start)?;
        let len = usize::try_from(end - start + 1).ok()?;
        let last = first.checked_add(len - 1)?;
        let slice = self.detections.get(first..=last)?;
        if slice.last()?.frame != end {
            return None;
        }
        Some(slice.iter().map(|d| d.position).collect())
    }
}

/// Cell label of an occupancy / semantic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    /// Semantic class id (any 8-bit code other than the free/occupied codes).
    Semantic(u8),
}

impl Cell {
    pub const OCCUPIED_CODE: u8 = 0;
    pub const FREE_CODE: u8 = 255;

    pub fn from_code(code: u8) -> Self {
        match code {
            Self::OCCUPIED_CODE => Cell::Occupied,
            Self::FREE_CODE => Cell::Free,
            id => Cell::Semantic(id),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Cell::Occupied => Self::OCCUPIED_CODE,
            Cell::Free => Self::FREE_CODE,
            Cell::Semantic(id) => id,
        }
    }
}

/// Rectangular grid map. Cell `(ix, iy)` covers
/// `origin + [ix, ix+1) x [iy, iy+1) * resolution`; `iy = 0` is the lowest row in world y.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    pub origin: Vec2,
    /// Row-major with `iy` as the row index.
    pub cells: Vec<Cell>,
    /// Optional semantic label names keyed by class id.
    pub labels: BTreeMap<u8, String>,
}

impl GridMap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
        cells: Vec<Cell>,
    ) -> Result<Self, DatasetError> {
        if width == 0 || height == 0 {
            return Err(DatasetError::DimensionMismatch(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(DatasetError::DimensionMismatch(format!(
                "{}x{} grid needs {} cells, got {}",
                width,
                height,
                width * height,
                cells.len()
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(DatasetError::Invalid(format!("resolution must be > 0, got {resolution}")));
        }
        if !(origin.x.is_finite() && origin.y.is_finite()) {
            return Err(DatasetError::Invalid("grid origin must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
            labels: BTreeMap::new(),
        })
    }

    pub fn cell(&self, ix: usize, iy: usize) -> Option<Cell> {
        (ix < self.width && iy < self.height).then(|| self.cells[iy * self.width + ix])
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.resolution
    }

    /// Cell containing a world point, if inside the map.
    pub fn cell_at(&self, world: &Vec2) -> Option<(usize, usize)> {
        let rel = (world - self.origin) / self.resolution;
        let (fx, fy) = (rel.x.floor(), rel.y.floor());
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        matches!(self.cell(ix, iy), Some(Cell::Occupied))
    }

    pub fn has_obstacles(&self) -> bool {
        self.cells.contains(&Cell::Occupied)
    }

    /// Nearest occupied cell center within `max_range` meters of `point`.
    pub fn nearest_occupied(&self, point: &Vec2, max_range: f64) -> Option<Vec2> {
        let reach = (max_range / self.resolution).ceil() as i64 + 1;
        let rel = (point - self.origin) / self.resolution;
        let (cx, cy) = (rel.x.floor() as i64, rel.y.floor() as i64);
        let x0 = (cx - reach).max(0);
        let x1 = (cx + reach).min(self.width as i64 - 1);
        let y0 = (cy - reach).max(0);
        let y1 = (cy + reach).min(self.height as i64 - 1);
        let mut best: Option<(f64, Vec2)> = None;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                if !self.is_occupied(ix as usize, iy as usize) {
                    continue;
                }
                let center = self.cell_center(ix as usize, iy as usize);
                let d2 = (center - point).norm_squared();
                if d2 <= max_range * max_range && best.is_none_or(|(b, _)| d2 < b) {
                    best = Some((d2, center));
                }
            }
        }
        best.map(|(_, c)| c)
    }
}

/// Static context of a dataset: map and candidate goals.
#[derive(Debug, Clone, Default)]
pub struct EnvironmentModel {
    pub grid: Option<GridMap>,
    pub goals: Vec<Vec2>,
    /// File the grid was loaded from, forwarded to external predictors.
    pub grid_path: Option<PathBuf>,
}

// The source path is bookkeeping, not content.
impl PartialEq for EnvironmentModel {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.goals == other.goals
    }
}

impl EnvironmentModel {
    pub fn is_empty(&self) -> bool {
        self.grid.is_none() && self.goals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub frequency_hz: f64,
    /// Sorted by agent id; the position in this vector is the agent's dense index.
    pub tracks: Vec<AgentTrack>,
    pub environment: Option<EnvironmentModel>,
}

impl Dataset {
    /// Groups detections into tracks. `frequency_hz` is inferred when `None`.
    pub fn from_detections(
        name: impl Into<String>,
        detections: Vec<Detection>,
        frequency_hz: Option<f64>,
        environment: Option<EnvironmentModel>,
    ) -> Result<Self, DatasetError> {
        if detections.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut grouped: BTreeMap<AgentId, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            grouped.entry(d.agent).or_default().push(d);
        }
        let tracks = grouped
            .into_iter()
            .map(|(agent, dets)| AgentTrack::new(agent, dets))
            .collect::<Result<Vec<_>, _>>()?;
        let frequency_hz = match frequency_hz {
            Some(f) if f > 0.0 && f.is_finite() => f,
            Some(f) => return Err(DatasetError::Invalid(format!("frequency must be > 0, got {f}"))),
            None => infer_frequency(&tracks)?,
        };
        Ok(Self {
            name: name.into(),
            frequency_hz,
            tracks,
            environment,
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    pub fn detection_count(&self) -> usize {
        self.tracks.iter().map(AgentTrack::len).sum()
    }

    pub fn detections(&self) -> impl Iterator<Item = &Detection> {
        self.tracks.iter().flat_map(|t| t.detections.iter())
    }

    pub fn frame_range(&self) -> Option<(i64, i64)> {
        let first = self.tracks.iter().filter_map(AgentTrack::first_frame).min()?;
        let last = self.tracks.iter().filter_map(AgentTrack::last_frame).max()?;
        Some((first, last))
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        let mut it = self.detections().map(|d| d.time);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t))))
    }

    pub fn track(&self, agent: AgentId) -> Option<&AgentTrack> {
        self.tracks
            .binary_search_by_key(&agent, |t| t.agent)
            .ok()
            .map(|i| &self.tracks[i])
    }

    /// Dense index of an agent.
    pub fn agent_index(&self, agent: AgentId) -> Option<usize> {
        self.tracks.binary_search_by_key(&agent, |t| t.agent).ok()
    }
}

/// 1 / median inter-detection interval over all tracks, snapped to micro-hertz so that
/// exact intervals like 0.4 s give exactly 2.5 Hz.
pub fn infer_frequency(tracks: &[AgentTrack]) -> Result<f64, DatasetError> {
    let mut intervals: Vec<f64> = tracks
        .iter()
        .flat_map(|t| t.detections.windows(2).map(|w| w[1].time - w[0].time))
        .filter(|dt| *dt > 0.0)
        .collect();
    if intervals.is_empty() {
        return Err(DatasetError::Invalid(
            "cannot infer frequency: no track has two detections".into(),
        ));
    }
    intervals.sort_by(f64::total_cmp);
    let n = intervals.len();
    let median = if n % 2 == 1 {
        intervals[n / 2]
    } else {
        0.5 * (intervals[n / 2 - 1] + intervals[n / 2])
    };
    let hz = 1.0 / median;
    Ok((hz * 1e6).round() / 1e6)
}
