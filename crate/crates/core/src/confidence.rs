//! Predictions and confidence scores from per-variant softmax vectors.
//!
//! Each classified image contributes one softmax vector per variant
//! (variant 0 is always the untransformed image). Prediction either uses
//! variant 0 alone (`SingleImage`) or the class-wise sum over all variants
//! (`Augmented`, i.e. test-time data augmentation). The confidence score is
//! the averaged softmax mass of the predicted class(es) over every variant;
//! with a single identity variant the whole pipeline collapses exactly to
//! the maximal-softmax-response baseline.

use thiserror::Error;

/// How far an ingested probability vector may stray from summing to 1 before
/// it is rejected outright; anything closer is renormalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfidenceError {
    #[error("probability vector is empty")]
    EmptyProbs,
    #[error("probability {value} at class {class} is negative or not finite")]
    BadProbability { class: usize, value: f64 },
    #[error("probabilities sum to {sum}, outside 1 +/- {NORMALIZATION_TOLERANCE}")]
    NotNormalized { sum: f64 },
    #[error("no records provided for image")]
    NoRecords,
    #[error("records mix class counts {a} and {b}")]
    InconsistentClassCount { a: usize, b: usize },
    #[error("records mix image ids `{a}` and `{b}`")]
    MixedImageIds { a: String, b: String },
    #[error("variant 0 (identity) is missing")]
    MissingIdentityVariant,
    #[error("top-{k} requires more than {k} classes (got {classes})")]
    TaskTooWide { k: usize, classes: usize },
    #[error("class index {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("duplicate class {0} in prediction")]
    DuplicatePredictedClass(usize),
}

/// One classifier output vector for one (image, variant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRecord {
    image_id: String,
    variant_id: u32,
    probs: Vec<f64>,
}

impl SoftmaxRecord {
    /// Validates and ingests a probability vector. Entries must be finite and
    /// non-negative; the sum must lie within [`NORMALIZATION_TOLERANCE`] of 1
    /// and is renormalized to exactly sum-of-one arithmetic by division.
    pub fn new(
        image_id: impl Into<String>,
        variant_id: u32,
        mut probs: Vec<f64>,
    ) -> Result<Self, ConfidenceError> {
        if probs.is_empty() {
            return Err(ConfidenceError::EmptyProbs);
        }
        for (class, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ConfidenceError::BadProbability { class, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ConfidenceError::NotNormalized { sum });
        }
        for p in &mut probs {
            *p /= sum;
        }
        Ok(SoftmaxRecord {
            image_id: image_id.into(),
            variant_id,
            probs,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn variant_id(&self) -> u32 {
        self.variant_id
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }
}

/// Whether prediction uses variant 0 only or the summed softmax over all
/// variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    SingleImage,
    Augmented,
}

/// Top-1 or top-5 classification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskMode {
    Top1,
    Top5,
}

impl TaskMode {
    pub fn k(self) -> usize {
        match self {
            TaskMode::Top1 => 1,
            TaskMode::Top5 => 5,
        }
    }
}

/// Per-image scoring output.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceResult {
    pub image_id: String,
    /// The k predicted class indices, most probable first.
    pub predicted: Vec<usize>,
    /// Averaged softmax mass of the predicted classes over all variants.
    pub confidence: f64,
    /// Maximal softmax response of variant 0 (top-k sum for `Top5`).
    pub msr_baseline: f64,
}

/// Sorts records by variant id so every downstream sum runs in one canonical
/// order; results are then exactly independent of input record order.
fn canonical_order<'a>(records: &'a [SoftmaxRecord]) -> Result<Vec<&'a SoftmaxRecord>, ConfidenceError> {
    if records.is_empty() {
        return Err(ConfidenceError::NoRecords);
    }
    let classes = records[0].class_count();
    let image_id = records[0].image_id();
    for r in records {
        if r.class_count() != classes {
            return Err(ConfidenceError::InconsistentClassCount {
                a: classes,
                b: r.class_count(),
            });
        }
        if r.image_id() != image_id {
            return Err(ConfidenceError::MixedImageIds {
                a: image_id.to_string(),
                b: r.image_id().to_string(),
            });
        }
    }
    let mut ordered: Vec<&SoftmaxRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.variant_id);
    Ok(ordered)
}

fn identity_record<'a>(ordered: &[&'a SoftmaxRecord]) -> Result<&'a SoftmaxRecord, ConfidenceError> {
    ordered
        .iter()
        .find(|r| r.variant_id == 0)
        .copied()
        .ok_or(ConfidenceError::MissingIdentityVariant)
}

/// Indices of the k largest scores, descending, ties to the lower index.
fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Predicts the top-k classes for one image.
pub fn predict(
    records: &[SoftmaxRecord],
    mode: PredictionMode,
    task: TaskMode,
) -> Result<Vec<usize>, ConfidenceError> {
    let ordered = canonical_order(records)?;
    let classes = ordered[0].class_count();
    if task.k() >= classes {
        return Err(ConfidenceError::TaskTooWide {
            k: task.k(),
            classes,
        });
    }
    match mode {
        PredictionMode::SingleImage => {
            let identity = identity_record(&ordered)?;
            Ok(top_k_indices(identity.probs(), task.k()))
        }
        PredictionMode::Augmented => {
            let mut sums = vec![0.0; classes];
            for record in &ordered {
                for (c, p) in record.probs().iter().enumerate() {
                    sums[c] += p;
                }
            }
            Ok(top_k_indices(&sums, task.k()))
        }
    }
}

/// Averaged softmax mass of class `c_star` over all provided variants.
pub fn aggregate_confidence(
    records: &[SoftmaxRecord],
    c_star: usize,
) -> Result<f64, ConfidenceError> {
    let ordered = canonical_order(records)?;
    let classes = ordered[0].class_count();
    if c_star >= classes {
        return Err(ConfidenceError::ClassOutOfRange {
            class: c_star,
            classes,
        });
    }
    let sum: f64 = ordered.iter().map(|r| r.probs()[c_star]).sum();
    Ok(sum / ordered.len() as f64)
}

/// Averaged softmax mass summed over the predicted classes; reduces to
/// [`aggregate_confidence`] for a single class.
pub fn topk_confidence(
    records: &[SoftmaxRecord],
    predicted: &[usize],
) -> Result<f64, ConfidenceError> {
    for (i, &c) in predicted.iter().enumerate() {
        if predicted[..i].contains(&c) {
            return Err(ConfidenceError::DuplicatePredictedClass(c));
        }
    }
    let mut total = 0.0;
    for &c in predicted {
        total += aggregate_confidence(records, c)?;
    }
    Ok(total)
}

/// Maximal softmax response of the identity variant: the largest entry for
/// top-1, the sum of the 5 largest entries for top-5.
pub fn msr_baseline(record: &SoftmaxRecord, task: TaskMode) -> Result<f64, ConfidenceError> {
    let classes = record.class_count();
    if task.k() >= classes {
        return Err(ConfidenceError::TaskTooWide {
            k: task.k(),
            classes,
        });
    }
    let top = top_k_indices(record.probs(), task.k());
    Ok(top.iter().map(|&c| record.probs()[c]).sum())
}

/// True when the prediction counts as correct: equality for top-1,
/// membership for top-5.
pub fn correctness(predicted: &[usize], true_label: usize) -> bool {
    predicted.contains(&true_label)
}

/// Runs the full per-image scoring pass: prediction, aggregated confidence,
/// and the variant-0 baseline.
pub fn score_image(
    records: &[SoftmaxRecord],
    mode: PredictionMode,
    task: TaskMode,
) -> Result<ConfidenceResult, ConfidenceError> {
    let ordered = canonical_order(records)?;
    let identity = identity_record(&ordered)?;
    let predicted = predict(records, mode, task)?;
    let confidence = topk_confidence(records, &predicted)?;
    let msr = msr_baseline(identity, task)?;
    Ok(ConfidenceResult {
        image_id: identity.image_id().to_string(),
        predicted,
        confidence,
        msr_baseline: msr,
    })
}
