use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Cell, DatasetError, EnvironmentModel, GridMap};
use crate::Vec2;

/// Metadata stored next to a grid file as `<grid file>.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSidecar {
    /// Meters per cell.
    pub resolution: f64,
    /// World position of the lower-left corner of the map.
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub height: Option<usize>,
    /// Declared semantic classes. When non-empty, undeclared class ids are rejected.
    #[serde(default)]
    pub labels: BTreeMap<u8, String>,
    #[serde(default)]
    pub goals: Vec<[f64; 2]>,
}

impl Default for GridSidecar {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            origin: [0.0, 0.0],
            width: None,
            height: None,
            labels: BTreeMap::new(),
            goals: Vec::new(),
        }
    }
}

impl GridSidecar {
    pub fn path_for(grid_path: &Path) -> PathBuf {
        let mut name = grid_path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".yaml");
        grid_path.with_file_name(name)
    }

    pub fn load_for(grid_path: &Path) -> Result<Self, DatasetError> {
        let path = Self::path_for(grid_path);
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        serde_yaml::from_str(&text).map_err(|e| {
            let line = e.location().map_or(0, |l| l.line());
            DatasetError::parse(&path, line, e.to_string())
        })
    }
}

/// Loads a grid map (plain-text matrix or 8-bit grayscale PNG) with explicit geometry.
///
/// Cell codes: 0 = occupied, 255 = free, anything else a semantic class id. The first
/// text row / top image row is the highest-y row of the map.
pub fn load_environment(
    path: impl AsRef<Path>,
    resolution: f64,
    origin: Vec2,
) -> Result<EnvironmentModel, DatasetError> {
    let path = path.as_ref();
    let sidecar = GridSidecar {
        resolution,
        origin: [origin.x, origin.y],
        ..GridSidecar::default()
    };
    let grid = read_grid(path, &sidecar)?;
    Ok(EnvironmentModel {
        grid: Some(grid),
        goals: Vec::new(),
        grid_path: Some(path.to_path_buf()),
    })
}

/// Like [`load_environment`] but reads geometry, labels and goals from `<path>.yaml`.
pub fn load_environment_with_sidecar(path: impl AsRef<Path>) -> Result<EnvironmentModel, DatasetError> {
    let path = path.as_ref();
    let sidecar = GridSidecar::load_for(path)?;
    let grid = read_grid(path, &sidecar)?;
    Ok(EnvironmentModel {
        grid: Some(grid),
        goals: sidecar.goals.iter().map(|g| Vec2::new(g[0], g[1])).collect(),
        grid_path: Some(path.to_path_buf()),
    })
}

/// Goals file: one `x y` (or `x,y`) pair per line, `#` comments allowed.
pub fn load_goals(path: impl AsRef<Path>) -> Result<Vec<Vec2>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let mut goals = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::parse(path, idx + 1, format!("bad goal coordinate: {e}")))?;
        match values[..] {
            [x, y] if x.is_finite() && y.is_finite() => goals.push(Vec2::new(x, y)),
            [_, _] => return Err(DatasetError::parse(path, idx + 1, "non-finite goal")),
            _ => {
                return Err(DatasetError::parse(
                    path,
                    idx + 1,
                    format!("expected 2 coordinates, got {}", values.len()),
                ))
            }
        }
    }
    Ok(goals)
}

pub fn read_grid(path: &Path, sidecar: &GridSidecar) -> Result<GridMap, DatasetError> {
    let is_image = matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png")
    );
    let (width, height, rows_top_first) = if is_image {
        read_image_codes(path)?
    } else {
        read_text_codes(path)?
    };
    if let Some(w) = sidecar.width {
        if w != width {
            return Err(DatasetError::DimensionMismatch(format!(
                "{}: metadata declares width {w}, file has {width}",
                path.display()
            )));
        }
    }
    if let Some(h) = sidecar.height {
        if h != height {
            return Err(DatasetError::DimensionMismatch(format!(
                "{}: metadata declares height {h}, file has {height}",
                path.display()
            )));
        }
    }
    let mut cells = Vec::with_capacity(width * height);
    for row in rows_top_first.iter().rev() {
        for &code in row {
            let code = u8::try_from(code).map_err(|_| DatasetError::UnknownSemanticLabel(code))?;
            let cell = Cell::from_code(code);
            if let Cell::Semantic(id) = cell {
                if !sidecar.labels.is_empty() && !sidecar.labels.contains_key(&id) {
                    return Err(DatasetError::UnknownSemanticLabel(id.into()));
                }
            }
            cells.push(cell);
        }
    }
    let origin = Vec2::new(sidecar.origin[0], sidecar.origin[1]);
    let mut grid = GridMap::new(width, height, sidecar.resolution, origin, cells)?;
    grid.labels = sidecar.labels.clone();
    Ok(grid)
}

fn read_text_codes(path: &Path) -> Result<(usize, usize, Vec<Vec<u32>>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<u32>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DatasetError::parse(path, idx + 1, format!("bad cell code: {e}")))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(DatasetError::DimensionMismatch(format!(
                    "{}:{}: row has {} cells, expected {}",
                    path.display(),
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    Ok((width, height, rows))
}

fn read_image_codes(path: &Path) -> Result<(usize, usize, Vec<Vec<u32>>), DatasetError> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_luma8();
    let (w, h) = img.dimensions();
    let rows = img
        .rows()
        .map(|row| row.map(|p| u32::from(p.0[0])).collect())
        .collect();
    Ok((w as usize, h as usize, rows))
}

/// Writes the grid as a text matrix (top row first); geometry is not included.
pub fn write_grid_text(grid: &GridMap, path: &Path) -> Result<(), DatasetError> {
    let mut out = String::with_capacity(grid.cells.len() * 4);
    for iy in (0..grid.height).rev() {
        let row: Vec<String> = (0..grid.width)
            .map(|ix| grid.cells[iy * grid.width + ix].code().to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DatasetError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_center_formula() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "255 255\n255 255\n").unwrap();
        let env = load_environment(&p, 1.0, Vec2::zeros()).unwrap();
        let grid = env.grid.unwrap();
        assert_eq!(grid.cell_center(0, 0), Vec2::new(0.5, 0.5));
        assert_eq!(grid.cell_at(&Vec2::new(1.2, 0.1)), Some((1, 0)));
        assert!(!grid.has_obstacles());
    }

    #[test]
    fn occupied_cell_query() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        // bottom-left cell occupied
        fs::write(&p, "255 255 255\n0 255 255\n").unwrap();
        let grid = load_environment(&p, 0.5, Vec2::new(-1.0, 2.0)).unwrap().grid.unwrap();
        assert_eq!((grid.width, grid.height), (3, 2));
        assert!(grid.is_occupied(0, 0));
        assert!(!grid.is_occupied(1, 0));
        assert_eq!(grid.cell_at(&Vec2::new(-0.9, 2.1)), Some((0, 0)));
        let near = grid.nearest_occupied(&Vec2::new(0.0, 2.25), 5.0).unwrap();
        assert_eq!(near, Vec2::new(-0.75, 2.25));
        assert!(grid.nearest_occupied(&Vec2::new(10.0, 10.0), 1.0).is_none());
    }

    #[test]
    fn goals_file_with_three_entries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("goals.txt");
        fs::write(&p, "# goals\n1 2\n3,4\n-5.5 6\n").unwrap();
        assert_eq!(load_goals(&p).unwrap().len(), 3);
    }

    #[test]
    fn ragged_rows_are_a_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "255 255\n255\n").unwrap();
        assert!(matches!(
            load_environment(&p, 1.0, Vec2::zeros()),
            Err(DatasetError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn sidecar_dimensions_labels_and_goals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "255 7\n0 255\n").unwrap();
        fs::write(
            GridSidecar::path_for(&p),
            "resolution: 0.25\norigin: [1.0, 1.0]\nwidth: 2\nheight: 2\nlabels: {7: door}\ngoals: [[0, 0], [1, 1]]\n",
        )
        .unwrap();
        let env = load_environment_with_sidecar(&p).unwrap();
        let grid = env.grid.as_ref().unwrap();
        assert_eq!(grid.cell(1, 1), Some(Cell::Semantic(7)));
        assert_eq!(env.goals.len(), 2);

        fs::write(GridSidecar::path_for(&p), "resolution: 0.25\nwidth: 3\n").unwrap();
        assert!(matches!(
            load_environment_with_sidecar(&p),
            Err(DatasetError::DimensionMismatch(_))
        ));

        fs::write(GridSidecar::path_for(&p), "resolution: 0.25\nlabels: {9: stairs}\n").unwrap();
        assert!(matches!(
            load_environment_with_sidecar(&p),
            Err(DatasetError::UnknownSemanticLabel(7))
        ));
    }

    #[test]
    fn out_of_range_code_is_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "300\n").unwrap();
        assert!(matches!(
            load_environment(&p, 1.0, Vec2::zeros()),
            Err(DatasetError::UnknownSemanticLabel(300))
        ));
    }

    #[test]
    fn grayscale_png_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let mut img = image::GrayImage::from_pixel(3, 2, image::Luma([255u8]));
        // top-left pixel is the highest-y row
        img.put_pixel(0, 0, image::Luma([0]));
        img.put_pixel(2, 1, image::Luma([4]));
        img.save(&p).unwrap();
        let grid = load_environment(&p, 1.0, Vec2::zeros()).unwrap().grid.unwrap();
        assert!(grid.is_occupied(0, 1));
        assert_eq!(grid.cell(2, 0), Some(Cell::Semantic(4)));
    }

    #[test]
    fn text_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "255 0 3\n0 255 255\n").unwrap();
        let grid = load_environment(&p, 0.1, Vec2::zeros()).unwrap().grid.unwrap();
        let q = dir.path().join("h.txt");
        write_grid_text(&grid, &q).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), fs::read_to_string(&q).unwrap());
    }
}
