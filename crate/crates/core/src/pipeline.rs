//! End-to-end training: split, render, augment, encode, grid-search, fit,
//! and evaluate on the held-out part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    cross_validate, evaluate, train, ClassifierError, ClassifierModel, CvReport, EvalReport,
};
use crate::features::{Encoder, FeatureError, FeatureParams, FeatureVector};
use crate::raster::{augment, dilate, rasterize, Battery, Canvas, RasterError};
use crate::sketch_io::{split_dataset, Dataset, Sketch, SketchError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Every knob of the pipeline. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub side: usize,
    pub battery: Battery,
    /// Train the final model on the battery-expanded training set.
    pub augment: bool,
    pub features: FeatureParams,
    pub train: crate::classifier::TrainConfig,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub feature_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            side: 256,
            battery: Battery::standard(),
            augment: true,
            features: FeatureParams::default(),
            train: Default::default(),
            train_fraction: 0.8,
            split_seed: 0,
            feature_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.side == 0 {
            return Err(PipelineError::BadConfig("side must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(PipelineError::BadConfig("train_fraction must lie in (0, 1)".into()));
        }
        self.features.validate(self.side)?;
        self.train.validate()?;
        Ok(())
    }

    /// The deterministic train/test split this config implies.
    pub fn split(&self, d: &Dataset) -> Result<(Dataset, Dataset), PipelineError> {
        Ok(split_dataset(d, self.train_fraction, self.split_seed)?)
    }
}

/// The dilated full render a classifier sees for a complete sketch.
pub fn render(s: &Sketch, side: usize) -> Result<Canvas, RasterError> {
    Ok(dilate(&rasterize(s, s.len(), side)?))
}

pub fn render_all(sketches: &[Sketch], side: usize) -> Result<Vec<Canvas>, RasterError> {
    sketches.par_iter().map(|s| render(s, side)).collect()
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub cv: CvReport,
    pub test: EvalReport,
    /// Number of feature vectors the final model was trained on.
    pub train_examples: usize,
    pub train_set: Dataset,
    pub test_set: Dataset,
}

/// [`train_pipeline_with_progress`] without progress messages.
pub fn train_pipeline(dataset: &Dataset, cfg: &PipelineConfig) -> Result<TrainOutcome, PipelineError> {
    train_pipeline_with_progress(dataset, cfg, &|_| {})
}

/// Splits the data, fits the encoder on the dilated training originals,
/// selects (C, gamma) by cross-validation on those originals, trains the final
/// model on the augmented training set, and evaluates on the test split.
///
/// Cross-validation never sees augmented copies, so no transformed copy of a
/// validation sketch can sit in the matching training fold.
pub fn train_pipeline_with_progress(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    let (train_set, test_set) = cfg.split(dataset)?;
    progress(&format!(
        "split: {} train, {} test sketches",
        train_set.len(),
        test_set.len()
    ));

    let originals = render_all(&train_set.sketches, cfg.side)?;
    let labels: Vec<String> = train_set.sketches.iter().map(|s| s.category.clone()).collect();
    let encoder = Encoder::fit(&originals, cfg.features, cfg.feature_seed)?;
    progress(&format!("encoder fitted, feature dimension {}", encoder.dim()));

    let original_features = encoder.encode_all(&originals)?;
    let cv = cross_validate(&original_features, &labels, &cfg.train)?;
    progress(&format!("cross-validation picked C={} gamma={:?}", cv.best.c, cv.best.gamma));

    let (features, feature_labels): (Vec<FeatureVector>, Vec<String>) = if cfg.augment {
        // Expanded per original so only one original's copies are alive per worker.
        let per_original = originals
            .par_iter()
            .zip(&labels)
            .map(|(c, l)| {
                augment(c, &cfg.battery)
                    .iter()
                    .map(|a| encoder.encode(a).map(|f| (f, l.clone())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        per_original.into_iter().flatten().unzip()
    } else {
        (original_features, labels)
    };
    drop(originals);
    progress(&format!("training final model on {} examples", features.len()));
    let svm = train(&features, &feature_labels, &cfg.train.with_candidate(cv.best))?;
    let train_examples = features.len();
    drop(features);

    let model = ClassifierModel {
        config: cfg.clone(),
        encoder,
        svm,
    };
    let test = evaluate_sketches(&model, &test_set.sketches)?;
    progress(&format!("test accuracy {:.4}", test.accuracy));
    Ok(TrainOutcome {
        model,
        cv,
        test,
        train_examples,
        train_set,
        test_set,
    })
}

/// Renders, encodes and classifies full sketches against their labels.
pub fn evaluate_sketches(model: &ClassifierModel, sketches: &[Sketch]) -> Result<EvalReport, PipelineError> {
    let canvases = render_all(sketches, model.side())?;
    let features = model.encoder.encode_all(&canvases)?;
    let labels: Vec<String> = sketches.iter().map(|s| s.category.clone()).collect();
    Ok(evaluate(&model.svm, &features, &labels)?)
}
