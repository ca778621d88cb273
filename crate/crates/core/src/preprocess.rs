//! Resampling, gap filling, smoothing and noise injection.
//!
//! [`preprocess`] applies the stages in a fixed order: downsample, interpolate gaps,
//! smooth, add noise.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AgentTrack, Dataset, Detection};
use crate::rng::keyed_rng;
use crate::Vec2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PreprocessError {
    #[error("target frequency {target} Hz exceeds source frequency {source_hz} Hz")]
    Upsampling { target: f64, source_hz: f64 },
    #[error("frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error("smoothing window must be odd and >= 1, got {0}")]
    BadWindow(usize),
    #[error("noise sigma must be >= 0, got {0}")]
    NegativeSigma(f64),
    #[error("gap tolerance factor must be > 0, got {0}")]
    BadGapFactor(f64),
    #[error("no detections left after resampling")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub target_hz: f64,
    /// Frames; odd.
    pub smoothing_window: usize,
    pub gap_tolerance_factor: f64,
    /// Meters.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_hz: 2.5,
            smoothing_window: 5,
            gap_tolerance_factor: 1.5,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.target_hz > 0.0 && self.target_hz.is_finite()) {
            return Err(PreprocessError::BadFrequency(self.target_hz));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(PreprocessError::BadWindow(self.smoothing_window));
        }
        if !(self.gap_tolerance_factor > 0.0) {
            return Err(PreprocessError::BadGapFactor(self.gap_tolerance_factor));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(PreprocessError::NegativeSigma(self.noise_sigma));
        }
        Ok(())
    }
}

/// Intervals `(start, end)` whose length exceeds `factor * expected_dt`, in time order.
pub fn detect_gaps(track: &AgentTrack, expected_dt: f64, gap_tolerance_factor: f64) -> Vec<(f64, f64)> {
    let limit = gap_tolerance_factor * expected_dt;
    track
        .detections
        .windows(2)
        .filter(|w| w[1].time - w[0].time > limit)
        .map(|w| (w[0].time, w[1].time))
        .collect()
}

/// Number of points to insert between two detections `span` seconds apart.
fn missing_points(span: f64, expected_dt: f64) -> usize {
    let steps = (span / expected_dt).round();
    if steps >= 2.0 {
        steps as usize - 1
    } else {
        0
    }
}

fn push_interpolated(out: &mut Vec<Detection>, a: &Detection, b: &Detection, count: usize) {
    let span = b.time - a.time;
    let frames = b.frame - a.frame;
    let parts = count as f64 + 1.0;
    for k in 1..=count {
        let s = k as f64 / parts;
        let frame = a.frame + ((k as i64 * frames) as f64 / parts).round() as i64;
        out.push(Detection {
            frame,
            time: a.time + s * span,
            agent: a.agent,
            position: a.position + (b.position - a.position) * s,
        });
    }
}

/// Linearly fills every interval spanning `round(dt_gap / expected_dt) >= 2` periods.
/// Original detections are kept untouched.
pub fn interpolate_gaps(track: &AgentTrack, expected_dt: f64) -> AgentTrack {
    fill(track, |a, b| missing_points(b.time - a.time, expected_dt))
}

/// Fills only the gaps reported by [`detect_gaps`] (at least one point per gap).
pub fn fill_detected_gaps(track: &AgentTrack, expected_dt: f64, gap_tolerance_factor: f64) -> AgentTrack {
    let limit = gap_tolerance_factor * expected_dt;
    fill(track, |a, b| {
        let span = b.time - a.time;
        if span > limit {
            missing_points(span, expected_dt).max(1)
        } else {
            0
        }
    })
}

fn fill(track: &AgentTrack, count: impl Fn(&Detection, &Detection) -> usize) -> AgentTrack {
    let mut out = Vec::with_capacity(track.detections.len());
    for (i, d) in track.detections.iter().enumerate() {
        if i > 0 {
            let prev = &track.detections[i - 1];
            let n = count(prev, d);
            if n > 0 {
                push_interpolated(&mut out, prev, d, n);
            }
        }
        out.push(*d);
    }
    AgentTrack {
        agent: track.agent,
        detections: out,
    }
}

/// Centered moving average. Near the track ends the radius shrinks symmetrically to
/// the distance from the end, so the first and last points are kept as they are.
pub fn smooth(track: &AgentTrack, window: usize) -> Result<AgentTrack, PreprocessError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PreprocessError::BadWindow(window));
    }
    let half = window / 2;
    let n = track.detections.len();
    if half == 0 || n < 3 {
        return Ok(track.clone());
    }
    // Prefix sums keep this O(n) for large windows.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Vec2::zeros());
    for d in &track.detections {
        let last = *prefix.last().expect("non-empty");
        prefix.push(last + d.position);
    }
    let detections = track
        .detections
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let r = half.min(i).min(n - 1 - i);
            let position = if r == 0 {
                d.position
            } else {
                (prefix[i + r + 1] - prefix[i - r]) / (2 * r + 1) as f64
            };
            Detection { position, ..*d }
        })
        .collect();
    Ok(AgentTrack {
        agent: track.agent,
        detections,
    })
}

/// One N(0, sigma^2) draw per axis, keyed by `(seed, agent, frame)`.
pub fn noise_offset(sigma: f64, seed: u64, agent: i64, frame: i64) -> Vec2 {
    let normal = Normal::new(0.0, sigma).expect("sigma checked by caller");
    let mut rng = keyed_rng(&[seed, agent as u64, frame as u64]);
    let dx = normal.sample(&mut rng);
    let dy = normal.sample(&mut rng);
    Vec2::new(dx, dy)
}

pub fn inject_noise(track: &AgentTrack, sigma: f64, seed: u64) -> Result<AgentTrack, PreprocessError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PreprocessError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(track.clone());
    }
    let detections = track
        .detections
        .iter()
        .map(|d| Detection {
            position: d.position + noise_offset(sigma, seed, d.agent.0, d.frame),
            ..*d
        })
        .collect();
    Ok(AgentTrack {
        agent: track.agent,
        detections,
    })
}

/// Reduces the dataset to `target_hz`.
///
/// Integer ratios decimate on the global frame index (frames `0, k, 2k, ...` are kept
/// and renumbered to `0, 1, 2, ...`). Other ratios resample each track on the global
/// grid `t = j / target_hz` by linear interpolation, with frame index `j`.
pub fn downsample(dataset: &Dataset, target_hz: f64) -> Result<Dataset, PreprocessError> {
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(PreprocessError::BadFrequency(target_hz));
    }
    let source = dataset.frequency_hz;
    if target_hz > source * (1.0 + 1e-9) {
        return Err(PreprocessError::Upsampling {
            target: target_hz,
            source_hz: source,
        });
    }
    let ratio = source / target_hz;
    let k = ratio.round();
    let tracks: Vec<AgentTrack> = if (ratio - k).abs() < 1e-6 {
        let k = k as i64;
        if k == 1 {
            dataset.tracks.clone()
        } else {
            dataset
                .tracks
                .iter()
                .map(|t| AgentTrack {
                    agent: t.agent,
                    detections: t
                        .detections
                        .iter()
                        .filter(|d| d.frame.rem_euclid(k) == 0)
                        .map(|d| Detection {
                            frame: d.frame.div_euclid(k),
                            ..*d
                        })
                        .collect(),
                })
                .collect()
        }
    } else {
        dataset.tracks.iter().map(|t| resample_track(t, target_hz)).collect()
    };
    let tracks: Vec<AgentTrack> = tracks.into_iter().filter(|t| !t.is_empty()).collect();
    if tracks.is_empty() {
        return Err(PreprocessError::Empty);
    }
    Ok(Dataset {
        name: dataset.name.clone(),
        frequency_hz: target_hz,
        tracks,
        environment: dataset.environment.clone(),
    })
}

fn resample_track(track: &AgentTrack, hz: f64) -> AgentTrack {
    let dets = &track.detections;
    let (Some(first), Some(last)) = (dets.first(), dets.last()) else {
        return track.clone();
    };
    let eps = 1e-9;
    let j0 = (first.time * hz - eps).ceil() as i64;
    let j1 = (last.time * hz + eps).floor() as i64;
    let mut out = Vec::new();
    let mut seg = 0usize;
    for j in j0..=j1 {
        let t = j as f64 / hz;
        while seg + 1 < dets.len() && dets[seg + 1].time < t - eps {
            seg += 1;
        }
        let a = &dets[seg];
        let position = if (t - a.time).abs() <= eps || seg + 1 == dets.len() {
            a.position
        } else {
            let b = &dets[seg + 1];
            if (b.time - t).abs() <= eps {
                b.position
            } else {
                let s = (t - a.time) / (b.time - a.time);
                a.position + (b.position - a.position) * s
            }
        };
        out.push(Detection {
            frame: j,
            time: t,
            agent: track.agent,
            position,
        });
    }
    AgentTrack {
        agent: track.agent,
        detections: out,
    }
}

/// Full pipeline: downsample, gap interpolation, smoothing, noise.
pub fn preprocess(dataset: &Dataset, config: &PreprocessConfig) -> Result<Dataset, PreprocessError> {
    config.validate()?;
    let mut out = downsample(dataset, config.target_hz)?;
    let dt = out.dt();
    let mut gaps = 0usize;
    let mut tracks = Vec::with_capacity(out.tracks.len());
    for track in &out.tracks {
        gaps += detect_gaps(track, dt, config.gap_tolerance_factor).len();
        let filled = fill_detected_gaps(track, dt, config.gap_tolerance_factor);
        let smoothed = smooth(&filled, config.smoothing_window)?;
        tracks.push(inject_noise(&smoothed, config.noise_sigma, config.noise_seed)?);
    }
    if gaps > 0 {
        log::info!("{}: interpolated {gaps} gaps", dataset.name);
    }
    out.tracks = tracks;
    Ok(out)
}
