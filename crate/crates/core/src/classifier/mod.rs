//! One-vs-rest SVM classification of feature vectors, cross-validated grid
//! search, evaluation, and the serialized canvas-to-label model.

mod cv;
mod model;
pub mod svm;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureVector};
use crate::sketch_io::keyed_rng;
use svm::{pegasos, rbf, smo, LinearMachine};

pub use cv::{cross_validate, stratified_folds, CvReport};
pub use model::{ClassifierModel, CONTAINER_MAGIC, CONTAINER_VERSION};

/// Largest training set accepted by the RBF path, which holds the full Gram
/// matrix in memory.
pub const RBF_MAX_SAMPLES: usize = 12_000;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    Empty,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training data has a single category; at least 2 required")]
    SingleCategory,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("category `{category}` has {count} example(s), fewer than {folds} folds")]
    CategoryTooSmall {
        category: String,
        count: usize,
        folds: usize,
    },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("rbf training is limited to {limit} samples, got {n}")]
    TooLargeForRbf { n: usize, limit: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("not a model container (bad magic)")]
    BadMagic,
    #[error("unsupported model container version {0}")]
    UnsupportedVersion(u32),
    #[error("model container is truncated")]
    Truncated,
    #[error("model payload: {0}")]
    Payload(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// One point of the hyperparameter grid. `gamma` is only used by RBF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: Option<f64>,
    pub folds: usize,
    /// Empty means [`TrainConfig::default_grid`].
    pub grid: Vec<Candidate>,
    pub seed: u64,
    /// Passes over the data for the linear solver.
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kernel: KernelKind::Linear,
            c: 1.0,
            gamma: None,
            folds: 5,
            grid: Vec::new(),
            seed: 0,
            epochs: 20,
        }
    }
}

impl TrainConfig {
    /// C in {0.1, 1, 10, 100}; for RBF crossed with gamma in {1/dim, 10/dim}.
    pub fn default_grid(kernel: KernelKind, dim: usize) -> Vec<Candidate> {
        let cs = [0.1, 1.0, 10.0, 100.0];
        match kernel {
            KernelKind::Linear => cs.iter().map(|&c| Candidate { c, gamma: None }).collect(),
            KernelKind::Rbf => cs
                .iter()
                .flat_map(|&c| {
                    [1.0, 10.0].map(|s| Candidate {
                        c,
                        gamma: Some(s / dim.max(1) as f64),
                    })
                })
                .collect(),
        }
    }

    pub fn grid_for(&self, dim: usize) -> Vec<Candidate> {
        if self.grid.is_empty() {
            Self::default_grid(self.kernel, dim)
        } else {
            self.grid.clone()
        }
    }

    pub fn with_candidate(&self, cand: Candidate) -> TrainConfig {
        TrainConfig {
            c: cand.c,
            gamma: cand.gamma.or(self.gamma),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::BadConfig(m.to_string()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return bad("gamma must be positive");
        }
        if self.grid.iter().any(|c| !c.c.is_finite() || c.c <= 0.0 || c.gamma.is_some_and(|g| !g.is_finite() || g <= 0.0)) {
            return bad("grid candidates need positive C and gamma");
        }
        Ok(())
    }
}

/// RBF decision function for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfMachine {
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum Decision {
    Linear { machines: Vec<LinearMachine> },
    Rbf { gamma: f64, machines: Vec<RbfMachine> },
}

/// One decision function per category; prediction is the argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub categories: Vec<String>,
    pub dim: usize,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub category: String,
    pub scores: Vec<f64>,
}

impl OneVsRest {
    pub fn kernel(&self) -> KernelKind {
        match self.decision {
            Decision::Linear { .. } => KernelKind::Linear,
            Decision::Rbf { .. } => KernelKind::Rbf,
        }
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn scores(&self, f: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if f.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                found: f.len(),
            });
        }
        Ok(match &self.decision {
            Decision::Linear { machines } => machines.iter().map(|m| m.decision(f)).collect(),
            Decision::Rbf { gamma, machines } => machines
                .iter()
                .map(|m| {
                    m.support
                        .iter()
                        .zip(&m.coef)
                        .map(|(sv, a)| a * rbf(*gamma, sv, f))
                        .sum::<f64>()
                        + m.bias
                })
                .collect(),
        })
    }
}

/// Index of the largest score; the earliest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn classify(m: &OneVsRest, f: &FeatureVector) -> Result<Prediction, ClassifierError> {
    let scores = m.scores(f.values())?;
    let index = argmax(&scores);
    Ok(Prediction {
        index,
        category: m.categories[index].clone(),
        scores,
    })
}

fn check_inputs(features: &[FeatureVector], labels: &[String]) -> Result<(Vec<String>, usize), ClassifierError> {
    if features.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if features.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let dim = features[0].dim();
    if let Some(bad) = features.iter().find(|f| f.dim() != dim) {
        return Err(ClassifierError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let mut categories = labels.to_vec();
    categories.sort();
    categories.dedup();
    if categories.len() < 2 {
        return Err(ClassifierError::SingleCategory);
    }
    Ok((categories, dim))
}

/// Trains one binary machine per category (category vs. all others) with the
/// single `(cfg.c, cfg.gamma)` setting. Categories are the sorted unique labels.
pub fn train(
    features: &[FeatureVector],
    labels: &[String],
    cfg: &TrainConfig,
) -> Result<OneVsRest, ClassifierError> {
    cfg.validate()?;
    let (categories, dim) = check_inputs(features, labels)?;
    let xs: Vec<&[f64]> = features.iter().map(FeatureVector::values).collect();
    let targets = |cat: &str| -> Vec<f64> {
        labels.iter().map(|l| if l == cat { 1.0 } else { -1.0 }).collect()
    };

    let decision = match cfg.kernel {
        KernelKind::Linear => {
            let lambda = 1.0 / (cfg.c * xs.len() as f64);
            let machines = categories
                .par_iter()
                .map(|cat| {
                    let mut rng: ChaCha8Rng = keyed_rng(cfg.seed, cat);
                    pegasos(&xs, &targets(cat), lambda, cfg.epochs, &mut rng).0
                })
                .collect();
            Decision::Linear { machines }
        }
        KernelKind::Rbf => {
            let n = xs.len();
            if n > RBF_MAX_SAMPLES {
                return Err(ClassifierError::TooLargeForRbf {
                    n,
                    limit: RBF_MAX_SAMPLES,
                });
            }
            let gamma = cfg.gamma.unwrap_or(1.0 / dim.max(1) as f64);
            let gram: Vec<f64> = (0..n * n)
                .into_par_iter()
                .map(|ij| rbf(gamma, xs[ij / n], xs[ij % n]))
                .collect();
            let machines = categories
                .par_iter()
                .map(|cat| {
                    let ys = targets(cat);
                    let sol = smo(|i, j| gram[i * n + j], &ys, cfg.c, 1e-5);
                    let mut m = RbfMachine {
                        support: Vec::new(),
                        coef: Vec::new(),
                        bias: sol.bias,
                    };
                    for (i, &a) in sol.alpha.iter().enumerate() {
                        if a > 0.0 {
                            m.support.push(xs[i].to_vec());
                            m.coef.push(a * ys[i]);
                        }
                    }
                    m
                })
                .collect();
            Decision::Rbf { gamma, machines }
        }
    };
    Ok(OneVsRest {
        categories,
        dim,
        decision,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<String>,
    pub accuracy: f64,
    /// `confusion[true][predicted]`, indexed like `categories`.
    pub confusion: Vec<Vec<usize>>,
    /// Test items per true category.
    pub counts: Vec<usize>,
    pub total: usize,
}

pub fn evaluate(
    m: &OneVsRest,
    features: &[FeatureVector],
    labels: &[String],
) -> Result<EvalReport, ClassifierError> {
    if features.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if features.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let truth = labels
        .iter()
        .map(|l| m.category_index(l).ok_or_else(|| ClassifierError::UnknownCategory(l.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let predicted = features
        .par_iter()
        .map(|f| classify(m, f).map(|p| p.index))
        .collect::<Result<Vec<_>, _>>()?;
    let k = m.categories.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(&predicted) {
        confusion[t][p] += 1;
    }
    let counts: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        categories: m.categories.clone(),
        accuracy: correct as f64 / features.len() as f64,
        confusion,
        counts,
        total: features.len(),
    })
}
