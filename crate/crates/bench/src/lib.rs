//! Shared fixtures for the benchmarks.

use epitome_core::features::{DescriptorParams, Encoder, FeatureParams};
use epitome_core::pipeline::render_all;
use epitome_core::synthetic::{generate, SyntheticSpec};
use epitome_core::{Canvas, Dataset};

pub fn dataset(per_category: usize) -> Dataset {
    generate(&SyntheticSpec {
        per_category,
        ..Default::default()
    })
}

pub fn canvases(d: &Dataset, side: usize) -> Vec<Canvas> {
    render_all(&d.sketches, side).expect("synthetic sketches render")
}

/// Default feature settings at a reduced sample size so fitting stays quick.
pub fn encoder(canvases: &[Canvas]) -> Encoder {
    let params = FeatureParams {
        descriptor: DescriptorParams::default(),
        fit_samples: 4000,
        ..Default::default()
    };
    Encoder::fit(canvases, params, 0).expect("encoder fits on synthetic canvases")
}
