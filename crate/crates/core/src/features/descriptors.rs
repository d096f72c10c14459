use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::raster::Canvas;

/// Shape of the local orientation-histogram descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorParams {
    /// Keypoints per axis.
    pub grid: usize,
    /// Patch side in pixels.
    pub patch: usize,
    /// Spatial cells per patch axis.
    pub cells: usize,
    /// Orientation bins over [0, 180) degrees.
    pub bins: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        DescriptorParams {
            grid: 28,
            patch: 32,
            cells: 4,
            bins: 8,
        }
    }
}

impl DescriptorParams {
    pub fn dim(&self) -> usize {
        self.cells * self.cells * self.bins
    }

    pub fn validate(&self, side: usize) -> Result<(), FeatureError> {
        let bad = |reason: String| Err(FeatureError::BadParams(reason));
        if self.grid == 0 || self.patch == 0 || self.cells == 0 || self.bins == 0 {
            return bad("descriptor parameters must be positive".into());
        }
        if !self.patch.is_multiple_of(self.cells) {
            return bad(format!("patch {} not divisible by cells {}", self.patch, self.cells));
        }
        if self.grid > side {
            return bad(format!("grid {} exceeds canvas side {side}", self.grid));
        }
        Ok(())
    }

    /// Keypoint stride and the coordinate of the first keypoint centre.
    pub fn layout(&self, side: usize) -> (usize, usize) {
        let stride = side / self.grid;
        let offset = (side - stride * (self.grid - 1)) / 2;
        (stride, offset)
    }
}

/// Descriptors on the keypoint grid, row-major by keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub descriptors: Vec<Vec<f64>>,
    /// `(row, col)` grid index of each descriptor.
    pub positions: Vec<(usize, usize)>,
}

impl DescriptorSet {
    /// Descriptors that carry any gradient energy.
    pub fn non_zero(&self) -> impl Iterator<Item = &[f64]> {
        self.descriptors
            .iter()
            .filter(|d| d.iter().any(|&v| v != 0.0))
            .map(Vec::as_slice)
    }
}

struct Gradients {
    width: usize,
    height: usize,
    magnitude: Vec<f64>,
    // Lower orientation bin and the share of magnitude it receives.
    bin: Vec<u16>,
    share: Vec<f64>,
}

fn gradients(c: &Canvas, bins: usize) -> Gradients {
    let (w, h) = (c.width(), c.height());
    let ink = |x: i64, y: i64| c.get_signed(x, y) as u8 as f64;

    // One 3x3 box pass, zero outside the canvas.
    let mut smooth = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut s = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    s += ink(x + dx, y + dy);
                }
            }
            smooth[y as usize * w + x as usize] = s / 9.0;
        }
    }
    let at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            smooth[y as usize * w + x as usize]
        }
    };

    let bin_width = PI / bins as f64;
    let mut magnitude = vec![0.0; w * h];
    let mut bin = vec![0u16; w * h];
    let mut share = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            let m = gx.hypot(gy);
            if m == 0.0 {
                continue;
            }
            let i = y as usize * w + x as usize;
            // Polarity carries no meaning for strokes: fold into [0, pi).
            let theta = gy.atan2(gx).rem_euclid(PI);
            let u = theta / bin_width;
            let lower = u.floor();
            magnitude[i] = m;
            bin[i] = (lower as usize % bins) as u16;
            share[i] = 1.0 - (u - lower);
        }
    }
    Gradients {
        width: w,
        height: h,
        magnitude,
        bin,
        share,
    }
}

/// Computes one `cells x cells x bins` histogram per keypoint. Bin `b` is
/// centred on orientation `b * 180 / bins` degrees and magnitude is split
/// linearly between the two nearest bins. Each descriptor is L2-normalized;
/// patches without gradient stay zero.
pub fn extract_descriptors(
    c: &Canvas,
    params: &DescriptorParams,
) -> Result<DescriptorSet, FeatureError> {
    let side = c.width().min(c.height());
    params.validate(side)?;
    let g = gradients(c, params.bins);
    let (stride, offset) = params.layout(side);
    let cell = params.patch / params.cells;
    let half = (params.patch / 2) as i64;
    let dim = params.dim();

    let mut descriptors = Vec::with_capacity(params.grid * params.grid);
    let mut positions = Vec::with_capacity(params.grid * params.grid);
    for row in 0..params.grid {
        for col in 0..params.grid {
            let cy = (offset + row * stride) as i64;
            let cx = (offset + col * stride) as i64;
            let mut hist = vec![0.0; dim];
            for py in 0..params.patch {
                let y = cy - half + py as i64;
                if y < 0 || y >= g.height as i64 {
                    continue;
                }
                for px in 0..params.patch {
                    let x = cx - half + px as i64;
                    if x < 0 || x >= g.width as i64 {
                        continue;
                    }
                    let i = y as usize * g.width + x as usize;
                    let m = g.magnitude[i];
                    if m == 0.0 {
                        continue;
                    }
                    let base = ((py / cell) * params.cells + px / cell) * params.bins;
                    let b0 = g.bin[i] as usize;
                    let b1 = (b0 + 1) % params.bins;
                    hist[base + b0] += m * g.share[i];
                    hist[base + b1] += m * (1.0 - g.share[i]);
                }
            }
            let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                hist.iter_mut().for_each(|v| *v /= norm);
            }
            descriptors.push(hist);
            positions.push((row, col));
        }
    }
    Ok(DescriptorSet {
        descriptors,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{transform, Transform};

    #[test]
    fn blank_canvas_gives_zero_descriptors() {
        let p = DescriptorParams::default();
        let ds = extract_descriptors(&Canvas::blank(256, 256), &p).unwrap();
        assert_eq!(ds.descriptors.len(), 28 * 28);
        assert!(ds.descriptors.iter().all(|d| d.len() == 128 && d.iter().all(|&v| v == 0.0)));
        assert_eq!(ds.non_zero().count(), 0);
    }

    #[test]
    fn vertical_line_peaks_in_horizontal_gradient_bin() {
        let mut c = Canvas::blank(256, 256);
        for y in 20..236 {
            for x in 127..=129 {
                c.set(x, y, true);
            }
        }
        let p = DescriptorParams::default();
        let ds = extract_descriptors(&c, &p).unwrap();
        let (stride, offset) = p.layout(256);
        let mut checked = 0;
        for (d, &(row, col)) in ds.descriptors.iter().zip(&ds.positions) {
            let (cx, cy) = (offset + col * stride, offset + row * stride);
            // Patches that straddle the line well away from its ends.
            if cx.abs_diff(128) > 8 || !(60..=196).contains(&cy) {
                continue;
            }
            let mut totals = vec![0.0; p.bins];
            for (i, v) in d.iter().enumerate() {
                totals[i % p.bins] += v;
            }
            let argmax = (0..p.bins).max_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
            // A vertical step edge has a purely horizontal gradient: 0 mod 180.
            assert_eq!(argmax, 0);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn deterministic() {
        let mut c = Canvas::blank(64, 64);
        for i in 5..60 {
            c.set(i, (i * 7) % 64, true);
        }
        let p = DescriptorParams {
            grid: 8,
            ..Default::default()
        };
        assert_eq!(extract_descriptors(&c, &p).unwrap(), extract_descriptors(&c, &p).unwrap());
    }

    #[test]
    fn descriptors_are_unit_or_zero() {
        let mut c = Canvas::blank(128, 128);
        for i in 10..100 {
            c.set(i, 40, true);
            c.set(60, i, true);
        }
        let p = DescriptorParams {
            grid: 14,
            ..Default::default()
        };
        for d in extract_descriptors(&c, &p).unwrap().descriptors {
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn shift_by_stride_permutes_descriptors() {
        let p = DescriptorParams::default();
        let (stride, _) = p.layout(256);
        let mut c = Canvas::blank(256, 256);
        for i in 90..170 {
            c.set(i, 100, true);
            c.set(110, i, true);
            c.set(i, i, true);
        }
        let shifted = transform(&c, &Transform::Shift { dx: stride as i64, dy: stride as i64 });
        let a = extract_descriptors(&c, &p).unwrap();
        let b = extract_descriptors(&shifted, &p).unwrap();
        let g = p.grid;
        for row in 2..g - 3 {
            for col in 2..g - 3 {
                assert_eq!(a.descriptors[row * g + col], b.descriptors[(row + 1) * g + col + 1]);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let p = DescriptorParams {
            patch: 30,
            ..Default::default()
        };
        assert!(extract_descriptors(&Canvas::blank(256, 256), &p).is_err());
    }
}
