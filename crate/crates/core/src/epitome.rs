//! Category-epitomes.
//!
//! A sketch with strokes `s_1..s_N` yields the cumulative canvases
//! `S_i = {s_1..s_i}`. Each canvas is classified and marked 1 when the true
//! category is recovered. The product sequence holds the suffix products of
//! those labels, `P_i = l_i * l_(i+1) * ... * l_N`, and the epitome index is the
//! smallest `i` with `P_i = 1`: the earliest canvas that is correctly
//! classified together with every later canvas. The epitome-score is `e / N`,
//! except that `e = 1` scores 0.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, ClassifierModel};
use crate::raster::{dilate, draw_stroke, Canvas, RasterError, Viewport};
use crate::sketch_io::Sketch;

#[derive(Debug, Error)]
pub enum EpitomeError {
    #[error("label sequence is empty")]
    EmptySequence,
    #[error("sketch is not epitomizable: its full canvas is misclassified")]
    NotEpitomizable,
    #[error("epitome index {e} out of range 1..={n}")]
    IndexOutOfRange { e: usize, n: usize },
    #[error("label sequence has {labels} entries for a sketch of {strokes} strokes")]
    LengthMismatch { labels: usize, strokes: usize },
    #[error("label values must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("category `{0}` is unknown to the classifier")]
    UnknownCategory(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Per-prefix correctness bits `l_1..l_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSequence(Vec<u8>);

impl LabelSequence {
    pub fn new(bits: Vec<u8>) -> Result<Self, EpitomeError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(EpitomeError::BadLabel(b));
        }
        Ok(LabelSequence(bits))
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        LabelSequence(bits.into_iter().map(u8::from).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Suffix products `P_1..P_N`; always a run of 0s followed by a run of 1s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductSequence(Vec<u8>);

impl ProductSequence {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn product_sequence(labels: &LabelSequence) -> ProductSequence {
    let mut out = vec![0u8; labels.len()];
    let mut acc = 1u8;
    for (p, &l) in out.iter_mut().zip(&labels.0).rev() {
        acc *= l;
        *p = acc;
    }
    ProductSequence(out)
}

/// 1-based index of the first `P_i = 1`. Fails when `P_N = 0`, i.e. the full
/// sketch is misclassified.
pub fn epitome_index(products: &ProductSequence) -> Result<usize, EpitomeError> {
    match products.0.last() {
        None => Err(EpitomeError::EmptySequence),
        Some(0) => Err(EpitomeError::NotEpitomizable),
        Some(_) => Ok(products.0.iter().position(|&p| p == 1).expect("last product is 1") + 1),
    }
}

/// `e / N`, or 0 when the first stroke alone is already the epitome.
pub fn epitome_score(e: usize, n: usize) -> Result<f64, EpitomeError> {
    if e == 0 || e > n {
        return Err(EpitomeError::IndexOutOfRange { e, n });
    }
    Ok(if e == 1 { 0.0 } else { e as f64 / n as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpitomeResult {
    pub id: String,
    pub category: String,
    pub n: usize,
    pub labels: LabelSequence,
    pub products: ProductSequence,
    /// 1-based epitome index.
    pub e: usize,
    pub score: f64,
}

impl EpitomeResult {
    /// Checks the relations that must hold between labels, `e` and the score.
    pub fn check(&self) -> Result<(), String> {
        let l = self.labels.bits();
        if l.len() != self.n || self.products.len() != self.n {
            return Err(format!("{}: sequence lengths differ from N={}", self.id, self.n));
        }
        if self.e == 0 || self.e > self.n {
            return Err(format!("{}: e={} outside 1..={}", self.id, self.e, self.n));
        }
        if l[self.e - 1..].iter().any(|&b| b != 1) {
            return Err(format!("{}: a label at or after e={} is 0", self.id, self.e));
        }
        if self.e > 1 && l[self.e - 2] != 0 {
            return Err(format!("{}: label before e={} is not 0", self.id, self.e));
        }
        if self.products != product_sequence(&self.labels) {
            return Err(format!("{}: product sequence mismatch", self.id));
        }
        if !(0.0..=1.0).contains(&self.score) || (self.score == 0.0) != (self.e == 1) {
            return Err(format!("{}: score {} inconsistent with e={}", self.id, self.score, self.e));
        }
        Ok(())
    }
}

/// Result of running the procedure on one sketch.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Epitome(EpitomeResult),
    /// The full canvas was misclassified; the sketch is skipped.
    NotEpitomizable {
        id: String,
        category: String,
        labels: LabelSequence,
    },
}

impl Outcome {
    pub fn epitome(&self) -> Option<&EpitomeResult> {
        match self {
            Outcome::Epitome(r) => Some(r),
            Outcome::NotEpitomizable { .. } => None,
        }
    }

    pub fn to_record(&self) -> BatchRecord {
        match self {
            Outcome::Epitome(r) => BatchRecord {
                id: r.id.clone(),
                category: r.category.clone(),
                n: r.n,
                labels: r.labels.bits().to_vec(),
                e: Some(r.e),
                score: Some(r.score),
                epitomizable: true,
            },
            Outcome::NotEpitomizable { id, category, labels } => BatchRecord {
                id: id.clone(),
                category: category.clone(),
                n: labels.len(),
                labels: labels.bits().to_vec(),
                e: None,
                score: None,
                epitomizable: false,
            },
        }
    }
}

/// One line of the newline-delimited batch output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub id: String,
    pub category: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub labels: Vec<u8>,
    pub e: Option<usize>,
    pub score: Option<f64>,
    pub epitomizable: bool,
}

impl BatchRecord {
    /// Rebuilds the outcome from the stored labels and verifies the stored
    /// `e` and score against it.
    pub fn to_outcome(&self) -> Result<Outcome, String> {
        let labels = LabelSequence::new(self.labels.clone()).map_err(|e| e.to_string())?;
        if labels.len() != self.n {
            return Err(format!("{}: {} labels for N={}", self.id, labels.len(), self.n));
        }
        let outcome = epitome_from_labels(&self.id, &self.category, labels).map_err(|e| e.to_string())?;
        match (&outcome, self.epitomizable) {
            (Outcome::Epitome(r), true) if Some(r.e) == self.e && self.score.is_some_and(|s| (s - r.score).abs() <= 1e-12) => {
                Ok(outcome)
            }
            (Outcome::NotEpitomizable { .. }, false) => Ok(outcome),
            _ => Err(format!("{}: stored e/score/epitomizable disagree with labels", self.id)),
        }
    }
}

impl fmt::Display for BatchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

/// Applies product sequence, epitome index and score to a label sequence.
pub fn epitome_from_labels(id: &str, category: &str, labels: LabelSequence) -> Result<Outcome, EpitomeError> {
    let products = product_sequence(&labels);
    match epitome_index(&products) {
        Ok(e) => {
            let n = labels.len();
            Ok(Outcome::Epitome(EpitomeResult {
                id: id.to_string(),
                category: category.to_string(),
                n,
                score: epitome_score(e, n)?,
                labels,
                products,
                e,
            }))
        }
        Err(EpitomeError::NotEpitomizable) => Ok(Outcome::NotEpitomizable {
            id: id.to_string(),
            category: category.to_string(),
            labels,
        }),
        Err(other) => Err(other),
    }
}

/// Lazily yields the dilated cumulative canvases `S_1..S_N`, drawing one more
/// stroke per step onto a running undilated canvas.
pub struct CumulativeCanvases<'a> {
    sketch: &'a Sketch,
    view: Viewport,
    running: Canvas,
    next: usize,
}

impl<'a> CumulativeCanvases<'a> {
    pub fn new(sketch: &'a Sketch, side: usize) -> Result<Self, RasterError> {
        if side == 0 {
            return Err(RasterError::ZeroSide);
        }
        Ok(CumulativeCanvases {
            sketch,
            view: Viewport::new(sketch.extent, side),
            running: Canvas::blank(side, side),
            next: 0,
        })
    }
}

impl Iterator for CumulativeCanvases<'_> {
    type Item = Canvas;

    fn next(&mut self) -> Option<Canvas> {
        let stroke = self.sketch.strokes.get(self.next)?;
        draw_stroke(&mut self.running, &self.view, &stroke.points);
        self.next += 1;
        Some(dilate(&self.running))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.sketch.strokes.len() - self.next;
        (left, Some(left))
    }
}

pub fn cumulative_canvases(s: &Sketch, side: usize) -> Result<Vec<Canvas>, RasterError> {
    Ok(CumulativeCanvases::new(s, side)?.collect())
}

/// Anything that maps a canvas to one of a fixed list of categories.
pub trait CanvasClassifier {
    fn categories(&self) -> &[String];
    /// Raster side the classifier expects.
    fn side(&self) -> usize;
    /// Index into [`CanvasClassifier::categories`].
    fn predict(&self, c: &Canvas) -> Result<usize, ClassifierError>;
}

impl CanvasClassifier for ClassifierModel {
    fn categories(&self) -> &[String] {
        ClassifierModel::categories(self)
    }

    fn side(&self) -> usize {
        ClassifierModel::side(self)
    }

    fn predict(&self, c: &Canvas) -> Result<usize, ClassifierError> {
        Ok(self.classify_canvas(c)?.index)
    }
}

pub fn label_sequence<M, I>(m: &M, canvases: I, true_category: &str) -> Result<LabelSequence, EpitomeError>
where
    M: CanvasClassifier + ?Sized,
    I: IntoIterator<Item = Canvas>,
{
    let target = m
        .categories()
        .iter()
        .position(|c| c == true_category)
        .ok_or_else(|| EpitomeError::UnknownCategory(true_category.to_string()))?;
    let mut bits = Vec::new();
    for c in canvases {
        bits.push(m.predict(&c)? == target);
    }
    Ok(LabelSequence::from_bools(bits))
}

/// Runs the full procedure on one sketch.
pub fn extract_epitome<M: CanvasClassifier + ?Sized>(m: &M, s: &Sketch) -> Result<Outcome, EpitomeError> {
    let canvases = CumulativeCanvases::new(s, m.side())?;
    let labels = label_sequence(m, canvases, &s.category)?;
    if labels.len() != s.len() {
        return Err(EpitomeError::LengthMismatch {
            labels: labels.len(),
            strokes: s.len(),
        });
    }
    epitome_from_labels(&s.id, &s.category, labels)
}
