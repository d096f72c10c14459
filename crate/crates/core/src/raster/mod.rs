//! Binary canvases: stroke rendering, 5x5 dilation and the augmentation battery.

mod transform;

use std::io::Write;

use thiserror::Error;

use crate::sketch_io::{Point, Sketch};

pub use transform::{augment, transform, Battery, Transform, BATTERY_SIZE};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("prefix length {prefix_len} out of range for a sketch with {strokes} stroke(s)")]
    PrefixOutOfRange { prefix_len: usize, strokes: usize },
    #[error("canvas side must be positive")]
    ZeroSide,
    #[error("augmentation battery must hold exactly {expected} transforms, got {found}")]
    BatterySize { expected: usize, found: usize },
    #[error("bad battery manifest: {0}")]
    BadManifest(String),
}

/// Half-width of the square structuring element (5x5).
pub const DILATION_RADIUS: usize = 2;

/// Fixed-size binary raster, row-major, 1 = ink.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn blank(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "canvas dimensions must be positive");
        Canvas {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    /// Builds a canvas from row-major values; any non-zero value counts as ink.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert!(width > 0 && height > 0, "canvas dimensions must be positive");
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        let pixels = pixels.into_iter().map(|p| (p != 0) as u8).collect();
        Canvas {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    /// Out-of-bounds coordinates read as blank.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, ink: bool) {
        self.pixels[y * self.width + x] = ink as u8;
    }

    /// Sets a pixel if it lies on the canvas.
    #[inline]
    pub fn plot(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = 1;
        }
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }

    /// Every ink pixel of `self` is also ink in `other`.
    pub fn is_subset_of(&self, other: &Canvas) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixels.iter().zip(&other.pixels).all(|(&a, &b)| a <= b)
    }

    /// Binary PGM (P5), ink black on white.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| if p != 0 { 0 } else { 255 }).collect();
        w.write_all(&bytes)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 16);
        self.write_pgm(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// Integer midpoint line between two pixel centres, all octants, endpoints
/// included.
pub fn draw_line(c: &mut Canvas, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        c.plot(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Maps native sketch coordinates onto a `side x side` pixel grid: uniform
/// scale, aspect preserved, centred.
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    scale: f64,
    offset_x: f64,
    offset_y: f64,
}

impl Viewport {
    pub fn new(extent: (f64, f64), side: usize) -> Self {
        let span = (side - 1) as f64;
        let scale = span / extent.0.max(extent.1);
        Viewport {
            scale,
            offset_x: (span - extent.0 * scale) / 2.0,
            offset_y: (span - extent.1 * scale) / 2.0,
        }
    }

    pub fn to_pixel(&self, p: Point) -> (i64, i64) {
        (
            (p.x * self.scale + self.offset_x).round() as i64,
            (p.y * self.scale + self.offset_y).round() as i64,
        )
    }
}

/// Draws one stroke as connected 1-pixel segments.
pub fn draw_stroke(c: &mut Canvas, view: &Viewport, points: &[Point]) {
    let mut pixels = points.iter().map(|&p| view.to_pixel(p));
    let Some(mut prev) = pixels.next() else {
        return;
    };
    c.plot(prev.0, prev.1);
    for px in pixels {
        if px != prev {
            draw_line(c, prev, px);
            prev = px;
        }
    }
}

/// Renders the first `prefix_len` strokes onto a blank `side x side` canvas.
pub fn rasterize(s: &Sketch, prefix_len: usize, side: usize) -> Result<Canvas, RasterError> {
    if side == 0 {
        return Err(RasterError::ZeroSide);
    }
    if prefix_len > s.strokes.len() {
        return Err(RasterError::PrefixOutOfRange {
            prefix_len,
            strokes: s.strokes.len(),
        });
    }
    let view = Viewport::new(s.extent, side);
    let mut c = Canvas::blank(side, side);
    for stroke in &s.strokes[..prefix_len] {
        draw_stroke(&mut c, &view, &stroke.points);
    }
    Ok(c)
}

/// Dilation by a 5x5 square, clipped at the canvas edges. Computed as a
/// horizontal then a vertical running max.
pub fn dilate(c: &Canvas) -> Canvas {
    let (w, h) = (c.width, c.height);
    let r = DILATION_RADIUS;
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        let row = &c.pixels[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = row[lo..=hi].iter().copied().max().unwrap_or(0);
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).max().unwrap_or(0);
        }
    }
    Canvas {
        width: w,
        height: h,
        pixels: out,
    }
}
