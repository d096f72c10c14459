use std::fmt;
use std::path::Path;

use epitome_core::analysis::AnalysisError;
use epitome_core::classifier::ClassifierError;
use epitome_core::epitome::EpitomeError;
use epitome_core::features::FeatureError;
use epitome_core::pipeline::PipelineError;
use epitome_core::raster::RasterError;
use epitome_core::sketch_io::SketchError;

/// Failures grouped by exit code. Messages are single lines.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Usage(m) | CliError::Data(m) => m.as_str(),
            CliError::Internal(m) => return write!(f, "internal error: {}", m.replace('\n', " ")),
        };
        f.write_str(&msg.replace('\n', " "))
    }
}

impl From<SketchError> for CliError {
    fn from(e: SketchError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::BadConfig(m) => CliError::Usage(format!("invalid config: {m}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::BadThresholds(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EpitomeError> for CliError {
    fn from(e: EpitomeError) -> Self {
        match e {
            EpitomeError::Raster(e) => e.into(),
            EpitomeError::Classifier(e) => e.into(),
            EpitomeError::UnknownCategory(_) | EpitomeError::BadLabel(_) => CliError::Data(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::BadConfig(m) => CliError::Usage(format!("invalid config: {m}")),
            PipelineError::Sketch(e) => e.into(),
            PipelineError::Raster(e) => e.into(),
            PipelineError::Feature(FeatureError::BadParams(m)) => CliError::Usage(format!("invalid config: {m}")),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Classifier(e) => e.into(),
        }
    }
}
