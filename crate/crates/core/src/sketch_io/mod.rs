//! Sketch data model, the canonical JSON format, dataset loading and splitting.
//!
//! A sketch is a category label plus strokes in the order they were drawn.
//! Strokes are polylines in the sketch's native coordinate space, which spans
//! `[0, width] x [0, height]` with the origin at the top-left and y pointing down.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

pub use svg::import_svg;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("malformed sketch document: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("empty sketch")]
    EmptySketch,
    #[error("stroke {stroke} has {points} point(s), at least 2 required")]
    ShortStroke { stroke: usize, points: usize },
    #[error("stroke {stroke} point {point} ({x}, {y}) lies outside the {width}x{height} extent")]
    OutOfExtent {
        stroke: usize,
        point: usize,
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    #[error("unsupported path command `{0}`")]
    UnsupportedCommand(char),
    #[error("malformed path data: {0}")]
    BadPathData(String),
    #[error("svg document contains no paths")]
    NoPaths,
    #[error("svg document is missing width/height")]
    MissingDimensions,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<SketchError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset root {0} contains no sketches")]
    EmptyDataset(PathBuf),
    #[error("{path}: sketch category `{found}` does not match directory `{expected}`")]
    CategoryMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("category `{category}` has {count} sketch(es), at least {required} required")]
    CategoryTooSmall {
        category: String,
        count: usize,
        required: usize,
    },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
}

impl Stroke {
    pub fn new(points: Vec<Point>) -> Self {
        Stroke { points }
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Self {
        Stroke {
            points: coords.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub id: String,
    pub category: String,
    /// Width and height of the native coordinate space.
    pub extent: (f64, f64),
    /// Strokes in temporal order.
    pub strokes: Vec<Stroke>,
}

impl Sketch {
    /// Builds a sketch and checks every structural invariant.
    pub fn new(
        id: impl Into<String>,
        category: impl Into<String>,
        extent: (f64, f64),
        strokes: Vec<Stroke>,
    ) -> Result<Self, SketchError> {
        let sketch = Sketch {
            id: id.into(),
            category: category.into(),
            extent,
            strokes,
        };
        sketch.validate()?;
        Ok(sketch)
    }

    /// Stroke count `N`.
    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        if self.category.is_empty() {
            return Err(SketchError::InvalidField {
                field: "category",
                reason: "must be non-empty".into(),
            });
        }
        let (w, h) = self.extent;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(SketchError::InvalidField {
                field: "extent",
                reason: format!("expected positive finite width and height, got [{w}, {h}]"),
            });
        }
        if self.strokes.is_empty() {
            return Err(SketchError::EmptySketch);
        }
        for (si, stroke) in self.strokes.iter().enumerate() {
            if stroke.points.len() < 2 {
                return Err(SketchError::ShortStroke {
                    stroke: si,
                    points: stroke.points.len(),
                });
            }
            for (pi, p) in stroke.points.iter().enumerate() {
                let inside = p.x.is_finite()
                    && p.y.is_finite()
                    && (0.0..=w).contains(&p.x)
                    && (0.0..=h).contains(&p.y);
                if !inside {
                    return Err(SketchError::OutOfExtent {
                        stroke: si,
                        point: pi,
                        x: p.x,
                        y: p.y,
                        width: w,
                        height: h,
                    });
                }
            }
        }
        Ok(())
    }

    /// Serializes to the canonical JSON document.
    pub fn to_json(&self) -> String {
        let strokes: Vec<Vec<[f64; 2]>> = self
            .strokes
            .iter()
            .map(|s| s.points.iter().map(|p| [p.x, p.y]).collect())
            .collect();
        json!({
            "id": self.id,
            "category": self.category,
            "extent": [self.extent.0, self.extent.1],
            "strokes": strokes,
        })
        .to_string()
    }
}

/// Parses one canonical sketch document.
pub fn parse_sketch(text: &str) -> Result<Sketch, SketchError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SketchError::Malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| SketchError::Malformed("top level must be an object".into()))?;

    let field = |name: &'static str| obj.get(name).ok_or(SketchError::MissingField(name));
    let invalid = |field: &'static str, reason: &str| SketchError::InvalidField {
        field,
        reason: reason.to_string(),
    };

    let id = field("id")?
        .as_str()
        .ok_or_else(|| invalid("id", "expected a string"))?
        .to_string();
    let category = field("category")?
        .as_str()
        .ok_or_else(|| invalid("category", "expected a string"))?
        .to_string();
    let extent = match field("extent")?.as_array().map(|a| a.as_slice()) {
        Some([w, h]) => match (w.as_f64(), h.as_f64()) {
            (Some(w), Some(h)) => (w, h),
            _ => return Err(invalid("extent", "expected two numbers")),
        },
        _ => return Err(invalid("extent", "expected [width, height]")),
    };
    let raw_strokes = field("strokes")?
        .as_array()
        .ok_or_else(|| invalid("strokes", "expected an array of strokes"))?;

    let mut strokes = Vec::with_capacity(raw_strokes.len());
    for raw in raw_strokes {
        let pts = raw
            .as_array()
            .ok_or_else(|| invalid("strokes", "each stroke must be an array of points"))?;
        let mut points = Vec::with_capacity(pts.len());
        for p in pts {
            match p.as_array().map(|a| a.as_slice()) {
                Some([x, y]) => match (x.as_f64(), y.as_f64()) {
                    (Some(x), Some(y)) => points.push(Point::new(x, y)),
                    _ => return Err(invalid("strokes", "point coordinates must be numbers")),
                },
                _ => return Err(invalid("strokes", "each point must be [x, y]")),
            }
        }
        strokes.push(Stroke { points });
    }

    Sketch::new(id, category, extent, strokes)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub sketches: Vec<Sketch>,
    /// Sorted, unique.
    pub categories: Vec<String>,
}

impl Dataset {
    /// Builds a dataset whose category list is derived from the sketches.
    pub fn from_sketches(sketches: Vec<Sketch>) -> Self {
        let mut categories: Vec<String> = sketches.iter().map(|s| s.category.clone()).collect();
        categories.sort();
        categories.dedup();
        Dataset {
            sketches,
            categories,
        }
    }

    pub fn len(&self) -> usize {
        self.sketches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sketches.is_empty()
    }

    /// Sketch indices grouped by category, in dataset order.
    pub fn by_category(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.sketches.iter().enumerate() {
            groups.entry(s.category.as_str()).or_default().push(i);
        }
        groups
    }
}

fn is_sketch_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("json") | Some("svg")
    )
}

/// Collects `root/<category>/<file>.{json,svg}` paths, sorted by path.
pub fn list_sketch_files(root: &Path) -> Result<Vec<(String, PathBuf)>, SketchError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SketchError::Io { path, source }
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(root).map_err(io(root))? {
        let dir = entry.map_err(io(root))?.path();
        if !dir.is_dir() {
            continue;
        }
        let Some(category) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        for entry in fs::read_dir(&dir).map_err(io(&dir))? {
            let path = entry.map_err(io(&dir))?.path();
            if path.is_file() && is_sketch_file(&path) {
                files.push((category.clone(), path));
            }
        }
    }
    files.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(files)
}

/// Reads one sketch file; SVGs take their category from `category` and their id
/// from the file stem.
pub fn load_sketch_file(category: &str, path: &Path) -> Result<Sketch, SketchError> {
    let wrap = |e: SketchError| SketchError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    };
    let text = fs::read_to_string(path).map_err(|source| SketchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if path.extension().and_then(|e| e.to_str()) == Some("svg") {
        let mut sketch = import_svg(&text, category).map_err(wrap)?;
        sketch.id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        Ok(sketch)
    } else {
        let sketch = parse_sketch(&text).map_err(wrap)?;
        if sketch.category != category {
            return Err(SketchError::CategoryMismatch {
                path: path.to_path_buf(),
                expected: category.to_string(),
                found: sketch.category,
            });
        }
        Ok(sketch)
    }
}

/// Loads every sketch under `root/<category>/`. The first unreadable or
/// invalid file aborts the load.
pub fn load_dataset(root: &Path) -> Result<Dataset, SketchError> {
    let files = list_sketch_files(root)?;
    if files.is_empty() {
        return Err(SketchError::EmptyDataset(root.to_path_buf()));
    }
    let sketches = files
        .par_iter()
        .map(|(category, path)| load_sketch_file(category, path))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::from_sketches(sketches))
}

// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Deterministic RNG keyed by a seed and a string, e.g. a category name.
pub(crate) fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(key.as_bytes());
    ChaCha8Rng::seed_from_u64(stable_hash(&bytes))
}

/// Number of training items for a category of `count` sketches (round half up).
pub fn train_count(count: usize, train_fraction: f64) -> usize {
    ((train_fraction * count as f64) + 0.5).floor() as usize
}

/// Splits each category independently into train and test parts. Both outputs
/// keep the input order.
pub fn split_dataset(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), SketchError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SketchError::BadFraction(train_fraction));
    }
    let mut in_train = vec![false; d.sketches.len()];
    for (category, mut indices) in d.by_category() {
        if indices.len() < 2 {
            return Err(SketchError::CategoryTooSmall {
                category: category.to_string(),
                count: indices.len(),
                required: 2,
            });
        }
        let k = train_count(indices.len(), train_fraction);
        indices.shuffle(&mut keyed_rng(seed, category));
        for &i in &indices[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = d
        .sketches
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    let strip = |v: Vec<(Sketch, bool)>| v.into_iter().map(|(s, _)| s).collect();
    Ok((
        Dataset {
            sketches: strip(train),
            categories: d.categories.clone(),
        },
        Dataset {
            sketches: strip(test),
            categories: d.categories.clone(),
        },
    ))
}
