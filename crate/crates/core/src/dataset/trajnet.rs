use std::path::Path;

use serde_json::{json, Map, Value};

use super::{Dataset, DatasetError, MapRecord, OnceWarner, ParsedFile, RawDetection};

const TRACK_FIELDS: [&str; 5] = ["f", "p", "x", "y", "t"];

pub(super) fn parse(path: &Path, text: &str) -> Result<ParsedFile, DatasetError> {
    let mut out = ParsedFile::default();
    let mut warner = OnceWarner::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| DatasetError::parse(path, line_no, format!("invalid JSON: {e}")))?;
        let Value::Object(record) = value else {
            return Err(DatasetError::parse(path, line_no, "record is not a JSON object"));
        };
        for (kind, body) in record {
            match kind.as_str() {
                "track" => out.detections.push(parse_track(path, line_no, &body, &mut warner)?),
                "goal" => out.goals.push(parse_goal(path, line_no, &body)?),
                "meta" => parse_meta(path, line_no, &body, &mut out, &mut warner)?,
                "map" => {
                    let map: MapRecord = serde_json::from_value(body)
                        .map_err(|e| DatasetError::parse(path, line_no, format!("bad map record: {e}")))?;
                    if out.map.replace(map).is_some() {
                        return Err(DatasetError::parse(path, line_no, "more than one map record"));
                    }
                }
                "scene" => {}
                other => warner.warn(path, &format!("unknown record type '{other}'")),
            }
        }
    }
    Ok(out)
}

fn object<'a>(path: &Path, line: usize, body: &'a Value, what: &str) -> Result<&'a Map<String, Value>, DatasetError> {
    body.as_object()
        .ok_or_else(|| DatasetError::parse(path, line, format!("{what} record must be an object")))
}

fn number(path: &Path, line: usize, obj: &Map<String, Value>, key: &str) -> Result<Option<f64>, DatasetError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| DatasetError::parse(path, line, format!("field '{key}' must be a number"))),
    }
}

fn integer(path: &Path, line: usize, obj: &Map<String, Value>, key: &str) -> Result<Option<i64>, DatasetError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_i64()
            .map(Some)
            .ok_or_else(|| DatasetError::parse(path, line, format!("field '{key}' must be an integer"))),
    }
}

fn parse_track(
    path: &Path,
    line: usize,
    body: &Value,
    warner: &mut OnceWarner,
) -> Result<RawDetection, DatasetError> {
    let obj = object(path, line, body, "track")?;
    for key in obj.keys() {
        if !TRACK_FIELDS.contains(&key.as_str()) {
            warner.warn(path, &format!("unknown track field '{key}'"));
        }
    }
    let agent = integer(path, line, obj, "p")?
        .ok_or_else(|| DatasetError::parse(path, line, "track record without person id 'p'"))?;
    let frame = integer(path, line, obj, "f")?;
    let time = number(path, line, obj, "t")?;
    if frame.is_none() && time.is_none() {
        return Err(DatasetError::parse(path, line, "track record needs 'f' or 't'"));
    }
    let x = number(path, line, obj, "x")?.ok_or_else(|| DatasetError::parse(path, line, "missing 'x'"))?;
    let y = number(path, line, obj, "y")?.ok_or_else(|| DatasetError::parse(path, line, "missing 'y'"))?;
    Ok(RawDetection {
        line,
        frame,
        time,
        agent,
        x,
        y,
    })
}

fn parse_goal(path: &Path, line: usize, body: &Value) -> Result<[f64; 2], DatasetError> {
    let obj = object(path, line, body, "goal")?;
    let x = number(path, line, obj, "x")?.ok_or_else(|| DatasetError::parse(path, line, "goal missing 'x'"))?;
    let y = number(path, line, obj, "y")?.ok_or_else(|| DatasetError::parse(path, line, "goal missing 'y'"))?;
    Ok([x, y])
}

fn parse_meta(
    path: &Path,
    line: usize,
    body: &Value,
    out: &mut ParsedFile,
    warner: &mut OnceWarner,
) -> Result<(), DatasetError> {
    let obj = object(path, line, body, "meta")?;
    for (key, value) in obj {
        match key.as_str() {
            "name" => {
                out.name = Some(
                    value
                        .as_str()
                        .ok_or_else(|| DatasetError::parse(path, line, "meta.name must be a string"))?
                        .to_string(),
                )
            }
            "frequency_hz" => {
                let hz = value
                    .as_f64()
                    .filter(|f| *f > 0.0)
                    .ok_or_else(|| DatasetError::parse(path, line, "meta.frequency_hz must be > 0"))?;
                out.frequency_hz = Some(hz);
            }
            other => warner.warn(path, &format!("unknown meta field '{other}'")),
        }
    }
    Ok(())
}

pub(super) fn render(dataset: &Dataset, map: Option<&MapRecord>) -> String {
    let mut lines = Vec::with_capacity(dataset.detection_count() + 4);
    lines.push(json!({"meta": {"name": dataset.name, "frequency_hz": dataset.frequency_hz}}).to_string());
    if let Some(env) = &dataset.environment {
        for g in &env.goals {
            lines.push(json!({"goal": {"x": g.x, "y": g.y}}).to_string());
        }
    }
    if let Some(map) = map {
        lines.push(json!({ "map": map }).to_string());
    }
    let mut detections: Vec<_> = dataset.detections().collect();
    detections.sort_by_key(|d| (d.frame, d.agent));
    for d in detections {
        lines.push(
            json!({"track": {"f": d.frame, "p": d.agent.0, "x": d.position.x, "y": d.position.y, "t": d.time}})
                .to_string(),
        );
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}
