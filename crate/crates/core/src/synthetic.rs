//! Procedurally drawn sketches for desk-scale end-to-end runs: five simple
//! categories with seeded placement, size, rotation and point jitter.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sketch_io::{keyed_rng, Dataset, Point, Sketch, Stroke};
use crate::util::normal;

pub const CATEGORIES: [&str; 5] = ["circle", "cross", "square", "star", "zigzag"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub per_category: usize,
    pub seed: u64,
    /// Side of the square native coordinate space.
    pub extent: f64,
    /// Scales every random perturbation; 0 draws ideal shapes.
    pub jitter: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            per_category: 40,
            seed: 7,
            extent: 800.0,
            jitter: 1.0,
        }
    }
}

/// Placement of the unit-scale shape on the page.
struct Pose {
    cx: f64,
    cy: f64,
    scale: f64,
    cos: f64,
    sin: f64,
    noise: f64,
    extent: f64,
}

impl Pose {
    fn random(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Self {
        let j = spec.jitter;
        let half = spec.extent / 2.0;
        let angle = j * rng.gen_range(-10.0..=10.0f64).to_radians();
        Pose {
            cx: half + j * rng.gen_range(-0.05..=0.05) * spec.extent,
            cy: half + j * rng.gen_range(-0.05..=0.05) * spec.extent,
            scale: 0.35 * spec.extent * (1.0 + j * rng.gen_range(-0.15..=0.1)),
            cos: angle.cos(),
            sin: angle.sin(),
            noise: j * 0.005 * spec.extent,
            extent: spec.extent,
        }
    }

    /// Maps unit-scale coordinates (y up) onto the page (y down) with noise.
    fn place(&self, rng: &mut ChaCha8Rng, (x, y): (f64, f64)) -> Point {
        let rx = x * self.cos - y * self.sin;
        let ry = x * self.sin + y * self.cos;
        let px = self.cx + self.scale * rx + self.noise * normal(rng);
        let py = self.cy - self.scale * ry + self.noise * normal(rng);
        Point::new(px.clamp(0.0, self.extent), py.clamp(0.0, self.extent))
    }

    /// A stroke through `vertices`, resampled so consecutive points sit about
    /// 0.05 units apart.
    fn stroke(&self, rng: &mut ChaCha8Rng, vertices: &[(f64, f64)]) -> Stroke {
        let mut pts = vec![self.place(rng, vertices[0])];
        for w in vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let steps = ((len / 0.05).ceil() as usize).max(1);
            for k in 1..=steps {
                let t = k as f64 / steps as f64;
                pts.push(self.place(rng, (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))));
            }
        }
        Stroke::new(pts)
    }
}

fn arc(cx: f64, cy: f64, r: f64, start: f64, sweep: f64, n: usize) -> Vec<(f64, f64)> {
    (0..=n)
        .map(|k| {
            let a = start + sweep * k as f64 / n as f64;
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

/// Stroke outlines in unit coordinates, in drawing order.
fn outline(category: &str, rng: &mut ChaCha8Rng, j: f64) -> Vec<Vec<(f64, f64)>> {
    let wobble = |rng: &mut ChaCha8Rng, v: f64| v + j * rng.gen_range(-0.06..=0.06);
    match category {
        // One closed contour first, then a few small marks inside it.
        "circle" => {
            let start = rng.gen_range(0.0..2.0 * PI);
            let mut strokes = vec![arc(0.0, 0.0, 1.0, start, 2.0 * PI, 64)];
            for _ in 0..rng.gen_range(2..=3) {
                let (x, y) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
                let a = rng.gen_range(0.0..PI);
                let l = 0.08;
                strokes.push(vec![(x - l * a.cos(), y - l * a.sin()), (x + l * a.cos(), y + l * a.sin())]);
            }
            strokes
        }
        "cross" => {
            let first = vec![(-1.0, wobble(rng, 0.0)), (1.0, wobble(rng, 0.0))];
            let second = vec![(wobble(rng, 0.0), 1.0), (wobble(rng, 0.0), -1.0)];
            if rng.gen_bool(0.5) {
                vec![first, second]
            } else {
                vec![second, first]
            }
        }
        "square" => {
            let s = 0.8;
            let c = [(-s, s), (s, s), (s, -s), (-s, -s)].map(|(x, y)| (wobble(rng, x), wobble(rng, y)));
            (0..4).map(|k| vec![c[k], c[(k + 1) % 4]]).collect()
        }
        // A pentagram drawn one edge per stroke.
        "star" => {
            let v: Vec<(f64, f64)> = (0..5)
                .map(|k| {
                    let a = PI / 2.0 + 2.0 * PI * k as f64 / 5.0;
                    (wobble(rng, a.cos()), wobble(rng, a.sin()))
                })
                .collect();
            (0..5).map(|k| vec![v[(2 * k) % 5], v[(2 * k + 2) % 5]]).collect()
        }
        "zigzag" => {
            let teeth = 6;
            let pts: Vec<(f64, f64)> = (0..=teeth)
                .map(|k| {
                    let x = -1.0 + 2.0 * k as f64 / teeth as f64;
                    let y = if k % 2 == 0 { -0.45 } else { 0.45 };
                    (wobble(rng, x), wobble(rng, y))
                })
                .collect();
            let mid = teeth / 2;
            vec![pts[..=mid].to_vec(), pts[mid..].to_vec()]
        }
        other => unreachable!("unknown synthetic category {other}"),
    }
}

/// One sketch of `category`; `index` selects the random stream.
pub fn sketch(spec: &SyntheticSpec, category: &str, index: usize) -> Sketch {
    assert!(CATEGORIES.contains(&category), "unknown synthetic category {category}");
    let id = format!("{category}-{index:03}");
    let mut rng = keyed_rng(spec.seed, &id);
    let pose = Pose::random(&mut rng, spec);
    let strokes = outline(category, &mut rng, spec.jitter)
        .iter()
        .map(|v| pose.stroke(&mut rng, v))
        .collect();
    Sketch::new(id, category, (spec.extent, spec.extent), strokes).expect("generated sketch is valid")
}

/// `per_category` sketches of each category, grouped by category.
pub fn generate(spec: &SyntheticSpec) -> Dataset {
    let sketches = CATEGORIES
        .iter()
        .flat_map(|c| (0..spec.per_category).map(move |i| sketch(spec, c, i)))
        .collect();
    Dataset::from_sketches(sketches)
}
