use serde::{Deserialize, Serialize};

use super::{Canvas, RasterError};

/// Number of canvases produced per sketch by augmentation.
pub const BATTERY_SIZE: usize = 30;

/// One geometric transform of a binary canvas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// Reflection across the vertical axis (column reversal).
    MirrorVerticalAxis,
    /// Rotation about the canvas centre; positive angles turn the image
    /// counterclockwise on screen.
    Rotate { degrees: f64 },
    /// Integer translation; positive `dx` moves ink right, positive `dy` down.
    Shift { dx: i64, dy: i64 },
    /// Central scaling by `1 + percent / 100`.
    Zoom { percent: f64 },
}

/// Applies `t`. Rotation and zoom use nearest-neighbour inverse mapping, so the
/// output stays binary; pixels that map outside the source are blank.
pub fn transform(c: &Canvas, t: &Transform) -> Canvas {
    let (w, h) = (c.width(), c.height());
    match *t {
        Transform::Identity => c.clone(),
        Transform::MirrorVerticalAxis => {
            let mut out = Canvas::blank(w, h);
            for y in 0..h {
                for x in 0..w {
                    out.set(x, y, c.get(w - 1 - x, y));
                }
            }
            out
        }
        Transform::Shift { dx, dy } => {
            let mut out = Canvas::blank(w, h);
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    if c.get_signed(x - dx, y - dy) {
                        out.set(x as usize, y as usize, true);
                    }
                }
            }
            out
        }
        Transform::Rotate { degrees } => {
            let (sin, cos) = degrees.to_radians().sin_cos();
            resample(c, |dx, dy| (cos * dx - sin * dy, sin * dx + cos * dy))
        }
        Transform::Zoom { percent } => {
            let f = 1.0 + percent / 100.0;
            resample(c, |dx, dy| (dx / f, dy / f))
        }
    }
}

/// Inverse-maps each output pixel, given as an offset from the centre, to a
/// source offset and samples the nearest source pixel.
fn resample(c: &Canvas, inverse: impl Fn(f64, f64) -> (f64, f64)) -> Canvas {
    let (w, h) = (c.width(), c.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = Canvas::blank(w, h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inverse(x as f64 - cx, y as f64 - cy);
            let sx = (cx + sx).round() as i64;
            let sy = (cy + sy).round() as i64;
            if c.get_signed(sx, sy) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// An ordered list of exactly [`BATTERY_SIZE`] transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Transform>", into = "Vec<Transform>")]
pub struct Battery(Vec<Transform>);

impl Battery {
    /// The default battery, in this order: the dilated original, the mirror
    /// image, rotations of +5, -5, +15 and -15 degrees, the 16 shifts with both
    /// components in {-15, -5, 5, 15}, the axis shifts (5,0), (-5,0), (0,5),
    /// (0,-5), and zooms of +3, -3, +7 and -7 percent.
    pub fn standard() -> Self {
        let mut t = vec![Transform::Identity, Transform::MirrorVerticalAxis];
        t.extend([5.0, -5.0, 15.0, -15.0].map(|degrees| Transform::Rotate { degrees }));
        let steps = [-15, -5, 5, 15];
        for dy in steps {
            for dx in steps {
                t.push(Transform::Shift { dx, dy });
            }
        }
        t.extend([(5, 0), (-5, 0), (0, 5), (0, -5)].map(|(dx, dy)| Transform::Shift { dx, dy }));
        t.extend([3.0, -3.0, 7.0, -7.0].map(|percent| Transform::Zoom { percent }));
        Battery(t)
    }

    pub fn new(transforms: Vec<Transform>) -> Result<Self, RasterError> {
        if transforms.len() != BATTERY_SIZE {
            return Err(RasterError::BatterySize {
                expected: BATTERY_SIZE,
                found: transforms.len(),
            });
        }
        Ok(Battery(transforms))
    }

    pub fn from_manifest(json: &str) -> Result<Self, RasterError> {
        let list: Vec<Transform> =
            serde_json::from_str(json).map_err(|e| RasterError::BadManifest(e.to_string()))?;
        Battery::new(list)
    }

    pub fn to_manifest(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("transforms always serialize")
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.0
    }
}

impl Default for Battery {
    fn default() -> Self {
        Battery::standard()
    }
}

impl TryFrom<Vec<Transform>> for Battery {
    type Error = RasterError;

    fn try_from(v: Vec<Transform>) -> Result<Self, Self::Error> {
        Battery::new(v)
    }
}

impl From<Battery> for Vec<Transform> {
    fn from(b: Battery) -> Self {
        b.0
    }
}

/// Expands an already dilated canvas into one canvas per battery entry.
pub fn augment(c: &Canvas, battery: &Battery) -> Vec<Canvas> {
    battery.0.iter().map(|t| transform(c, t)).collect()
}
