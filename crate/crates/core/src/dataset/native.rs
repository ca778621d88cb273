use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Dataset, DatasetError, MapRecord, OnceWarner, ParsedFile, RawDetection};

pub(super) const HEADER: &str = "frame,time,agent_id,x,y";

pub(super) fn parse(path: &Path, text: &str) -> Result<ParsedFile, DatasetError> {
    let mut out = ParsedFile::default();
    let mut warner = OnceWarner::default();
    let mut map: Option<MapRecord> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix('#') {
            parse_directive(path, line_no, directive.trim(), &mut out, &mut map, &mut warner)?;
            continue;
        }
        if line == HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(DatasetError::parse(
                path,
                line_no,
                format!("expected 5 fields ({HEADER}), got {}", fields.len()),
            ));
        }
        if fields.len() > 5 {
            warner.warn(path, "extra detection fields");
        }
        let bad = |what: &str, e: &dyn std::fmt::Display| {
            DatasetError::parse(path, line_no, format!("bad {what} '{}': {e}", what))
        };
        let frame: i64 = fields[0].parse().map_err(|e| bad("frame", &e))?;
        let time: f64 = fields[1].parse().map_err(|e| bad("time", &e))?;
        let agent: i64 = fields[2].parse().map_err(|e| bad("agent_id", &e))?;
        let x: f64 = fields[3].parse().map_err(|e| bad("x", &e))?;
        let y: f64 = fields[4].parse().map_err(|e| bad("y", &e))?;
        out.detections.push(RawDetection {
            line: line_no,
            frame: Some(frame),
            time: Some(time),
            agent,
            x,
            y,
        });
    }
    out.map = map;
    Ok(out)
}

fn parse_directive(
    path: &Path,
    line: usize,
    directive: &str,
    out: &mut ParsedFile,
    map: &mut Option<MapRecord>,
    warner: &mut OnceWarner,
) -> Result<(), DatasetError> {
    let Some((key, value)) = directive.split_once(':') else {
        // plain comment
        return Ok(());
    };
    let (key, value) = (key.trim(), value.trim());
    let pair = |s: &str| -> Result<[f64; 2], DatasetError> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::parse(path, line, format!("bad coordinate pair '{s}': {e}")))?;
        match v[..] {
            [a, b] => Ok([a, b]),
            _ => Err(DatasetError::parse(path, line, format!("expected 'x,y', got '{s}'"))),
        }
    };
    let map_mut = |map: &mut Option<MapRecord>| -> Result<(), DatasetError> {
        if map.is_none() {
            return Err(DatasetError::parse(path, line, "map attribute before '# map:' directive"));
        }
        Ok(())
    };
    match key {
        "format" => {}
        "name" => out.name = Some(value.to_string()),
        "frequency_hz" => {
            let hz: f64 = value
                .parse()
                .ok()
                .filter(|f: &f64| *f > 0.0)
                .ok_or_else(|| DatasetError::parse(path, line, "frequency_hz must be > 0"))?;
            out.frequency_hz = Some(hz);
        }
        "goal" => out.goals.push(pair(value)?),
        "map" => {
            *map = Some(MapRecord {
                path: PathBuf::from(value),
                resolution: None,
                origin: None,
                labels: Default::default(),
            })
        }
        "map_resolution" => {
            map_mut(map)?;
            let r: f64 = value
                .parse()
                .map_err(|e| DatasetError::parse(path, line, format!("bad map_resolution: {e}")))?;
            if let Some(m) = map.as_mut() {
                m.resolution = Some(r);
            }
        }
        "map_origin" => {
            map_mut(map)?;
            let o = pair(value)?;
            if let Some(m) = map.as_mut() {
                m.origin = Some(o);
            }
        }
        "map_label" => {
            map_mut(map)?;
            let (id, name) = value
                .split_once('=')
                .ok_or_else(|| DatasetError::parse(path, line, "map_label must be 'id=name'"))?;
            let id: u8 = id
                .trim()
                .parse()
                .map_err(|e| DatasetError::parse(path, line, format!("bad label id: {e}")))?;
            if let Some(m) = map.as_mut() {
                m.labels.insert(id, name.trim().to_string());
            }
        }
        other => warner.warn(path, &format!("unknown directive '{other}'")),
    }
    Ok(())
}

pub(super) fn render(dataset: &Dataset, map: Option<&MapRecord>) -> String {
    let mut out = String::with_capacity(dataset.detection_count() * 32);
    out.push_str("# format: trajbench-native 1\n");
    let _ = writeln!(out, "# name: {}", dataset.name);
    let _ = writeln!(out, "# frequency_hz: {}", dataset.frequency_hz);
    if let Some(env) = &dataset.environment {
        for g in &env.goals {
            let _ = writeln!(out, "# goal: {},{}", g.x, g.y);
        }
    }
    if let Some(map) = map {
        let _ = writeln!(out, "# map: {}", map.path.display());
        if let Some(r) = map.resolution {
            let _ = writeln!(out, "# map_resolution: {r}");
        }
        if let Some([x, y]) = map.origin {
            let _ = writeln!(out, "# map_origin: {x},{y}");
        }
        for (id, name) in &map.labels {
            let _ = writeln!(out, "# map_label: {id}={name}");
        }
    }
    out.push_str(HEADER);
    out.push('\n');
    let mut detections: Vec<_> = dataset.detections().collect();
    detections.sort_by_key(|d| (d.frame, d.agent));
    for d in detections {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            d.frame, d.time, d.agent.0, d.position.x, d.position.y
        );
    }
    out
}
