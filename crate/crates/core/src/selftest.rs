//! Built-in oracle suites, runnable from the command line without test
//! tooling: epitome arithmetic, morphology laws and EM monotonicity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::epitome::{epitome_index, epitome_score, product_sequence, LabelSequence};
use crate::features::{fit_gmm_traced, EmOptions};
use crate::raster::{dilate, transform, Canvas, Transform, DILATION_RADIUS};
use crate::util::normal;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub detail: String,
}

fn suite(name: &'static str, run: impl FnOnce() -> Result<usize, String>) -> SuiteResult {
    match run() {
        Ok(checks) => SuiteResult {
            name,
            passed: true,
            checks,
            detail: format!("{checks} checks"),
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            checks: 0,
            detail,
        },
    }
}

/// `1 + position of the last 0`, or 1 when there is none.
pub fn last_zero_oracle(bits: &[u8]) -> usize {
    bits.iter().rposition(|&b| b == 0).map_or(1, |p| p + 2)
}

/// Every label sequence of length 1..=`max_len` ending in 1.
pub fn epitome_suite(max_len: usize) -> Result<usize, String> {
    let mut checks = 0;
    for n in 1..=max_len {
        for mask in 0u64..(1 << (n - 1)) {
            let mut bits: Vec<u8> = (0..n - 1).map(|i| ((mask >> i) & 1) as u8).collect();
            bits.push(1);
            let labels = LabelSequence::new(bits.clone()).map_err(|e| e.to_string())?;
            let products = product_sequence(&labels);
            if products.bits().windows(2).any(|w| w[0] > w[1]) {
                return Err(format!("product sequence not monotone for {bits:?}"));
            }
            let e = epitome_index(&products).map_err(|e| e.to_string())?;
            if e != last_zero_oracle(&bits) {
                return Err(format!("epitome index {e} disagrees with scan for {bits:?}"));
            }
            let score = epitome_score(e, n).map_err(|e| e.to_string())?;
            let want = if e == 1 { 0.0 } else { e as f64 / n as f64 };
            if score != want {
                return Err(format!("score {score} != {want} for e={e}, N={n}"));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

fn random_canvas(rng: &mut ChaCha8Rng, side: usize, density: f64) -> Canvas {
    let pixels = (0..side * side).map(|_| u8::from(rng.gen_bool(density))).collect();
    Canvas::from_pixels(side, side, pixels)
}

/// Dilation against a brute-force neighbourhood OR.
pub fn dilate_oracle(c: &Canvas) -> Canvas {
    let r = DILATION_RADIUS as i64;
    let mut out = Canvas::blank(c.width(), c.height());
    for y in 0..c.height() {
        for x in 0..c.width() {
            let hit = (-r..=r).any(|dy| (-r..=r).any(|dx| c.get_signed(x as i64 + dx, y as i64 + dy)));
            out.set(x, y, hit);
        }
    }
    out
}

/// Extensivity, monotonicity, oracle equality, shift equivariance away from
/// the border, and mirror involution on random canvases.
pub fn morphology_suite(canvases: usize, side: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..canvases {
        let density = rng.gen_range(0.0..0.1);
        let a = random_canvas(&mut rng, side, density);
        let mut b = a.clone();
        for _ in 0..rng.gen_range(0..side) {
            b.set(rng.gen_range(0..side), rng.gen_range(0..side), true);
        }
        let da = dilate(&a);
        if !a.is_subset_of(&da) {
            return Err(format!("canvas {k}: dilation not extensive"));
        }
        if !da.is_subset_of(&dilate(&b)) {
            return Err(format!("canvas {k}: dilation not increasing"));
        }
        if da != dilate_oracle(&a) {
            return Err(format!("canvas {k}: dilation differs from neighbourhood oracle"));
        }
        let mirror = Transform::MirrorVerticalAxis;
        if transform(&transform(&a, &mirror), &mirror) != a {
            return Err(format!("canvas {k}: mirror is not an involution"));
        }
        // Shift equivariance on the interior, where no ink crosses the border.
        let margin = 8;
        let mut inner = Canvas::blank(side, side);
        for y in margin..side - margin {
            for x in margin..side - margin {
                inner.set(x, y, a.get(x, y));
            }
        }
        let shift = Transform::Shift { dx: 3, dy: -2 };
        if dilate(&transform(&inner, &shift)) != transform(&dilate(&inner), &shift) {
            return Err(format!("canvas {k}: dilation does not commute with shifts"));
        }
    }
    Ok(canvases * 5)
}

/// EM on random Gaussian blobs never decreases the log-likelihood by more
/// than `slack` per iteration.
pub fn em_suite(runs: usize, seed: u64, slack: f64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    for run in 0..runs {
        let dim = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=4);
        let n = rng.gen_range(40..=120);
        let centres: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let sample: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = &centres[i % k];
                c.iter().map(|m| m + rng.gen_range(0.3..1.5) * normal(&mut rng)).collect()
            })
            .collect();
        let fit = fit_gmm_traced(&sample, k, run as u64, &EmOptions::default())
            .map_err(|e| format!("run {run}: {e}"))?;
        for (i, w) in fit.log_likelihoods.windows(2).enumerate() {
            if w[1] < w[0] - slack {
                return Err(format!(
                    "run {run}: log-likelihood fell from {} to {} at iteration {}",
                    w[0],
                    w[1],
                    i + 1
                ));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

pub fn run_all() -> Vec<SuiteResult> {
    vec![
        suite("epitome-exhaustive", || epitome_suite(16)),
        suite("morphology-laws", || morphology_suite(100, 64, 1)),
        suite("em-monotone", || em_suite(100, 2, 1e-9)),
    ]
}
