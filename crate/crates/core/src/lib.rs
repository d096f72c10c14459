//! Category-epitomes of freehand sketches: the earliest stroke prefix after
//! which every cumulative canvas is recognised as the right category.
//!
//! Modules follow the data flow: [`sketch_io`] loads strokes, [`raster`]
//! renders canvases, [`features`] encodes them, [`classifier`] labels them,
//! [`epitome`] finds the epitome of each sketch and [`analysis`] summarises
//! scores per category.

pub mod analysis;
pub mod classifier;
pub mod epitome;
pub mod features;
pub mod pipeline;
pub mod raster;
pub mod selftest;
pub mod sketch_io;
pub mod synthetic;
mod util;

pub use analysis::{CategoryStats, ExceedanceCurve, HeadlineFraction};
pub use classifier::{ClassifierModel, EvalReport, OneVsRest, Prediction, TrainConfig};
pub use epitome::{BatchRecord, EpitomeResult, LabelSequence, Outcome, ProductSequence};
pub use features::{Encoder, FeatureParams, FeatureVector};
pub use pipeline::PipelineConfig;
pub use raster::{Battery, Canvas, Transform};
pub use sketch_io::{Dataset, Point, Sketch, Stroke};
