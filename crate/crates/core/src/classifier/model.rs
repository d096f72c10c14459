use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{classify, ClassifierError, OneVsRest, Prediction};
use crate::features::{Encoder, FeatureVector};
use crate::pipeline::PipelineConfig;
use crate::raster::Canvas;

pub const CONTAINER_MAGIC: &[u8; 4] = b"EPIT";
pub const CONTAINER_VERSION: u32 = 1;

/// The full canvas-to-label pipeline: feature encoder, decision functions and
/// the configuration they were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub config: PipelineConfig,
    pub encoder: Encoder,
    pub svm: OneVsRest,
}

impl ClassifierModel {
    pub fn categories(&self) -> &[String] {
        &self.svm.categories
    }

    pub fn side(&self) -> usize {
        self.config.side
    }

    pub fn encode(&self, c: &Canvas) -> Result<FeatureVector, ClassifierError> {
        Ok(self.encoder.encode(c)?)
    }

    pub fn classify_canvas(&self, c: &Canvas) -> Result<Prediction, ClassifierError> {
        classify(&self.svm, &self.encode(c)?)
    }

    /// `EPIT`, version as u32 LE, payload length as u64 LE, JSON payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = serde_json::to_vec(self).expect("model always serializes");
        let mut out = Vec::with_capacity(payload.len() + 16);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
            return Err(ClassifierError::BadMagic);
        }
        let version = bytes
            .get(4..8)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(ClassifierError::Truncated)?;
        if version != CONTAINER_VERSION {
            return Err(ClassifierError::UnsupportedVersion(version));
        }
        let len = bytes
            .get(8..16)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or(ClassifierError::Truncated)?;
        let payload = usize::try_from(len)
            .ok()
            .and_then(|len| bytes.get(16..16usize.checked_add(len)?))
            .ok_or(ClassifierError::Truncated)?;
        Ok(serde_json::from_slice(payload)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        fs::write(path, self.to_bytes()).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
