use epitome_core::classifier::ClassifierModel;
use epitome_core::epitome::{cumulative_canvases, label_sequence, CanvasClassifier};
use epitome_core::features::{DescriptorParams, FeatureParams};
use epitome_core::pipeline::{render, train_pipeline, PipelineConfig};
use epitome_core::raster::{dilate, rasterize};
use epitome_core::synthetic::{generate, SyntheticSpec};
use epitome_core::TrainConfig;

fn small_config() -> PipelineConfig {
    PipelineConfig {
        side: 64,
        augment: false,
        features: FeatureParams {
            descriptor: DescriptorParams {
                grid: 8,
                patch: 16,
                ..Default::default()
            },
            pca_dim: 12,
            components: 4,
            fit_samples: 3000,
        },
        train: TrainConfig {
            folds: 3,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn saved_model_scores_match() {
    let data = generate(&SyntheticSpec {
        per_category: 8,
        ..Default::default()
    });
    let out = train_pipeline(&data, &small_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.epit");
    out.model.save(&path).unwrap();
    let loaded = ClassifierModel::load(&path).unwrap();
    assert_eq!(loaded, out.model);
    for s in &out.test_set.sketches {
        let c = render(s, 64).unwrap();
        let a = out.model.classify_canvas(&c).unwrap();
        let b = loaded.classify_canvas(&c).unwrap();
        assert_eq!(a.index, b.index);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"EPIT");
    assert!(ClassifierModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn label_bits_recompute_independently() {
    let data = generate(&SyntheticSpec {
        per_category: 8,
        ..Default::default()
    });
    let out = train_pipeline(&data, &small_config()).unwrap();
    let m = &out.model;
    for s in &out.test_set.sketches {
        let canvases = cumulative_canvases(s, m.side()).unwrap();
        assert_eq!(canvases.len(), s.len());
        assert_eq!(*canvases.last().unwrap(), dilate(&rasterize(s, s.len(), m.side()).unwrap()));
        let labels = label_sequence(m, canvases.clone(), &s.category).unwrap();
        let truth = m.categories().iter().position(|c| *c == s.category).unwrap();
        for (i, c) in canvases.iter().enumerate() {
            let bit = u8::from(m.predict(c).unwrap() == truth);
            assert_eq!(labels.bits()[i], bit, "{} canvas {}", s.id, i + 1);
        }
    }
}
