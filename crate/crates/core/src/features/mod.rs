//! Canvas features: orientation-histogram descriptors on a keypoint grid,
//! PCA, a diagonal GMM fitted by EM, and Fisher-vector encoding.

mod descriptors;
mod fisher;
mod gmm;
mod pca;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Canvas;
use crate::sketch_io::keyed_rng;

pub use descriptors::{extract_descriptors, DescriptorParams, DescriptorSet};
pub use fisher::{fisher_encode, fisher_vector, loglik_gradients, normalize};
pub use gmm::{fit_gmm, fit_gmm_traced, EmFit, EmOptions, GmmModel, VARIANCE_FLOOR};
pub use pca::{fit_pca, PcaModel};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid feature parameters: {0}")]
    BadParams(String),
    #[error("sample too small: need at least {needed}, found {found}")]
    InsufficientSample { needed: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate sample: all points identical")]
    DegenerateSample,
}

/// Fixed-dimension encoding of one canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub descriptor: DescriptorParams,
    pub pca_dim: usize,
    pub components: usize,
    /// Descriptors drawn (spread over all training canvases) to fit PCA and GMM.
    pub fit_samples: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            descriptor: DescriptorParams::default(),
            pca_dim: 64,
            components: 32,
            fit_samples: 20_000,
        }
    }
}

impl FeatureParams {
    pub fn feature_dim(&self) -> usize {
        2 * self.components * self.pca_dim
    }

    pub fn validate(&self, side: usize) -> Result<(), FeatureError> {
        self.descriptor.validate(side)?;
        if self.pca_dim == 0 || self.pca_dim > self.descriptor.dim() {
            return Err(FeatureError::BadParams(format!(
                "pca_dim {} must lie in 1..={}",
                self.pca_dim,
                self.descriptor.dim()
            )));
        }
        if self.components == 0 || self.fit_samples == 0 {
            return Err(FeatureError::BadParams(
                "components and fit_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The fitted canvas-to-vector pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub params: FeatureParams,
    pub pca: PcaModel,
    pub gmm: GmmModel,
}

impl Encoder {
    /// Fits PCA and the GMM on descriptors sampled evenly across `canvases`.
    pub fn fit(canvases: &[Canvas], params: FeatureParams, seed: u64) -> Result<Self, FeatureError> {
        let side = canvases.first().map_or(0, |c| c.width().min(c.height()));
        params.validate(side)?;
        let quota = params.fit_samples.div_ceil(canvases.len().max(1));
        let mut sample: Vec<Vec<f64>> = canvases
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let ds = extract_descriptors(c, &params.descriptor)?;
                let mut picked: Vec<Vec<f64>> = ds.non_zero().map(<[f64]>::to_vec).collect();
                picked.shuffle(&mut keyed_rng(seed, &format!("canvas-{i}")));
                picked.truncate(quota);
                Ok(picked)
            })
            .collect::<Result<Vec<_>, FeatureError>>()?
            .into_iter()
            .flatten()
            .collect();
        sample.truncate(params.fit_samples);

        let pca = fit_pca(&sample, params.pca_dim)?;
        let projected: Vec<Vec<f64>> = sample.par_iter().map(|x| pca.project(x)).collect();
        let gmm = fit_gmm(&projected, params.components, seed)?;
        Ok(Encoder { params, pca, gmm })
    }

    pub fn dim(&self) -> usize {
        2 * self.gmm.components() * self.gmm.dim()
    }

    pub fn encode(&self, c: &Canvas) -> Result<FeatureVector, FeatureError> {
        let ds = extract_descriptors(c, &self.params.descriptor)?;
        fisher_encode(&ds, &self.pca, &self.gmm)
    }

    pub fn encode_all(&self, canvases: &[Canvas]) -> Result<Vec<FeatureVector>, FeatureError> {
        canvases.par_iter().map(|c| self.encode(c)).collect()
    }
}
