//! Selective-classification metrics over a confidence ranking.
//!
//! Inputs arrive as a [`CorrectnessVector`]: image ids ordered most-confident
//! first, each flagged correct or incorrect. The risk-coverage curve records
//! the cumulative error rate while accepting images in that order; point `k`
//! (1-based) sits at coverage `k/N` with risk `errors_among_top_k / k`.
//!
//! AURC is the discrete mean of the N risks. eAURC subtracts the AURC of the
//! oracle ordering (all correct first). AORC renormalizes against the worst
//! ordering (all errors first):
//! `(aurc_worst - aurc) / (aurc_worst - aurc_oracle)`, which is 1 for the
//! oracle ranking and 0 for the worst one regardless of classifier accuracy.
//! AUROC and AUPR treat misclassifications as the positive detection class,
//! scored by negated confidence.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("correctness vector is empty")]
    Empty,
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("AORC undefined: degenerate correctness (all correct or all wrong)")]
    DegenerateAorc,
    #[error("AUROC undefined: needs at least one correct and one incorrect entry")]
    DegenerateAuroc,
    #[error("AUPR undefined: needs at least one incorrect entry")]
    DegenerateAupr,
    #[error("no scores for image ids: {}", .0.join(", "))]
    MissingScores(Vec<String>),
    #[error("no correctness entries for ranked ids: {}", .0.join(", "))]
    MissingEntries(Vec<String>),
    #[error("target {0} outside [0, 1]")]
    TargetOutOfRange(f64),
}

/// Image ids in decreasing-confidence order, each marked correct or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessVector {
    entries: Vec<(String, bool)>,
}

impl CorrectnessVector {
    pub fn new(entries: Vec<(String, bool)>) -> Result<Self, MetricsError> {
        if entries.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut seen = BTreeSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(MetricsError::DuplicateId(id.clone()));
            }
        }
        Ok(CorrectnessVector { entries })
    }

    /// Joins a ranking with per-id correctness; every ranked id must appear
    /// in the map, missing ids are reported exhaustively.
    pub fn from_ranking(
        ranked_ids: &[String],
        correct: &BTreeMap<String, bool>,
    ) -> Result<Self, MetricsError> {
        let missing: Vec<String> = ranked_ids
            .iter()
            .filter(|id| !correct.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(MetricsError::MissingEntries(missing));
        }
        CorrectnessVector::new(
            ranked_ids
                .iter()
                .map(|id| (id.clone(), correct[id]))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(String, bool)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_errors(&self) -> usize {
        self.entries.iter().filter(|(_, c)| !c).count()
    }

    fn flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.entries.iter().map(|(_, c)| *c)
    }
}

/// One point of the risk-coverage curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcPoint {
    pub coverage: f64,
    pub risk: f64,
}

/// The N-point risk-coverage curve; point `k-1` sits at coverage `k/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcCurve {
    points: Vec<RcPoint>,
}

impl RcCurve {
    pub fn points(&self) -> &[RcPoint] {
        &self.points
    }
}

/// Aggregate metric report for one ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub aurc: f64,
    pub eaurc: f64,
    pub aorc: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub n: usize,
    pub n_errors: usize,
}

/// What to report when AORC/AUROC/AUPR are undefined on a degenerate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    /// Surface the degeneracy as an error.
    #[default]
    Error,
    /// Report 1.0 by convention (a degenerate ranking is vacuously perfect).
    One,
}

/// Fraction of correct entries.
pub fn accuracy(v: &CorrectnessVector) -> f64 {
    let correct = v.len() - v.n_errors();
    correct as f64 / v.len() as f64
}

/// Builds the risk-coverage curve by accepting entries in ranking order.
pub fn rc_curve(v: &CorrectnessVector) -> RcCurve {
    let n = v.len();
    let mut points = Vec::with_capacity(n);
    let mut errors = 0usize;
    for (k, correct) in v.flags().enumerate() {
        if !correct {
            errors += 1;
        }
        let accepted = k + 1;
        points.push(RcPoint {
            coverage: accepted as f64 / n as f64,
            risk: errors as f64 / accepted as f64,
        });
    }
    RcCurve { points }
}

/// Discrete mean of the curve's risks (one per coverage step).
pub fn aurc(curve: &RcCurve) -> f64 {
    let sum: f64 = curve.points.iter().map(|p| p.risk).sum();
    sum / curve.points.len() as f64
}

/// Mean risk of a boolean correctness sequence. This is the single code path
/// behind AURC, eAURC, and AORC, so the oracle/worst reorderings of the same
/// flags produce bit-identical sums.
fn mean_risk(flags: impl Iterator<Item = bool>) -> f64 {
    let mut sum = 0.0;
    let mut errors = 0usize;
    let mut n = 0usize;
    for correct in flags {
        n += 1;
        if !correct {
            errors += 1;
        }
        sum += errors as f64 / n as f64;
    }
    sum / n as f64
}

fn oracle_flags(n: usize, n_errors: usize) -> impl Iterator<Item = bool> {
    (0..n).map(move |k| k < n - n_errors)
}

fn worst_flags(n: usize, n_errors: usize) -> impl Iterator<Item = bool> {
    (0..n).map(move |k| k >= n_errors)
}

/// AURC of the actual ranking minus AURC of the oracle ranking.
pub fn eaurc(v: &CorrectnessVector) -> f64 {
    let n = v.len();
    let n_errors = v.n_errors();
    mean_risk(v.flags()) - mean_risk(oracle_flags(n, n_errors))
}

/// Normalized area over the risk-coverage curve:
/// `(aurc_worst - aurc) / (aurc_worst - aurc_oracle)`. 1 for the oracle
/// ranking, 0 for the worst, undefined when all entries agree.
pub fn aorc(v: &CorrectnessVector) -> Result<f64, MetricsError> {
    let n = v.len();
    let n_errors = v.n_errors();
    if n_errors == 0 || n_errors == n {
        return Err(MetricsError::DegenerateAorc);
    }
    let actual = mean_risk(v.flags());
    let oracle = mean_risk(oracle_flags(n, n_errors));
    let worst = mean_risk(worst_flags(n, n_errors));
    Ok((worst - actual) / (worst - oracle))
}

/// AUROC of the confidence scores as a misclassification detector, computed
/// by rank statistics over (score, correct) pairs:
/// `P(score(correct) > score(error)) + 0.5 * P(equal)`.
pub fn auroc_pairs(pairs: &[(f64, bool)]) -> Result<f64, MetricsError> {
    let n_correct = pairs.iter().filter(|(_, c)| *c).count();
    let n_error = pairs.len() - n_correct;
    if n_correct == 0 || n_error == 0 {
        return Err(MetricsError::DegenerateAuroc);
    }
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));
    // Average ranks over tie groups keep every arithmetic step exact in f64
    // (sums of integers and halves), so this matches pair counting exactly.
    let mut rank_sum_correct = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of 1-based ranks i+1..=j
        let correct_in_group = sorted[i..j].iter().filter(|(_, c)| *c).count();
        rank_sum_correct += avg_rank * correct_in_group as f64;
        i = j;
    }
    let u = rank_sum_correct - (n_correct * (n_correct + 1)) as f64 / 2.0;
    Ok(u / (n_correct as f64 * n_error as f64))
}

/// Average precision of misclassification detection: positives are errors,
/// the detection score is the negated confidence, tied scores are processed
/// as one group (step integration).
pub fn aupr_pairs(pairs: &[(f64, bool)]) -> Result<f64, MetricsError> {
    let total_pos = pairs.iter().filter(|(_, c)| !*c).count();
    if total_pos == 0 {
        return Err(MetricsError::DegenerateAupr);
    }
    // Descending by negated confidence == ascending by confidence.
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));
    let mut sum = 0.0;
    let mut cum_pos = 0usize;
    let mut cum_n = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let group_pos = sorted[i..j].iter().filter(|(_, c)| !*c).count();
        cum_pos += group_pos;
        cum_n += j - i;
        if group_pos > 0 {
            sum += group_pos as f64 * (cum_pos as f64 / cum_n as f64);
        }
        i = j;
    }
    Ok(sum / total_pos as f64)
}

fn join_scores(
    scores: &BTreeMap<String, f64>,
    v: &CorrectnessVector,
) -> Result<Vec<(f64, bool)>, MetricsError> {
    let missing: Vec<String> = v
        .entries
        .iter()
        .filter(|(id, _)| !scores.contains_key(id))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingScores(missing));
    }
    Ok(v.entries
        .iter()
        .map(|(id, c)| (scores[id], *c))
        .collect())
}

/// [`auroc_pairs`] over a score map joined with the correctness vector.
pub fn auroc(
    scores: &BTreeMap<String, f64>,
    v: &CorrectnessVector,
) -> Result<f64, MetricsError> {
    auroc_pairs(&join_scores(scores, v)?)
}

/// [`aupr_pairs`] over a score map joined with the correctness vector.
pub fn aupr(scores: &BTreeMap<String, f64>, v: &CorrectnessVector) -> Result<f64, MetricsError> {
    aupr_pairs(&join_scores(scores, v)?)
}

/// Maximum coverage whose risk stays at or below `target_risk` (0 if none).
pub fn coverage_at_risk(curve: &RcCurve, target_risk: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&target_risk) {
        return Err(MetricsError::TargetOutOfRange(target_risk));
    }
    Ok(curve
        .points
        .iter()
        .filter(|p| p.risk <= target_risk)
        .map(|p| p.coverage)
        .fold(0.0, f64::max))
}

/// Risk at the smallest coverage at or above `target_coverage`.
pub fn risk_at_coverage(curve: &RcCurve, target_coverage: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&target_coverage) {
        return Err(MetricsError::TargetOutOfRange(target_coverage));
    }
    let point = curve
        .points
        .iter()
        .find(|p| p.coverage >= target_coverage)
        .expect("final coverage is 1.0, so every target in [0, 1] is reachable");
    Ok(point.risk)
}

/// Computes the full metric suite for one ranking. `scores` feeds AUROC and
/// AUPR; degenerate metrics follow `policy`.
pub fn report(
    v: &CorrectnessVector,
    scores: &BTreeMap<String, f64>,
    policy: DegeneratePolicy,
) -> Result<MetricReport, MetricsError> {
    let curve = rc_curve(v);
    let with_policy = |r: Result<f64, MetricsError>| match (r, policy) {
        (Ok(value), _) => Ok(value),
        (Err(MetricsError::DegenerateAorc), DegeneratePolicy::One)
        | (Err(MetricsError::DegenerateAuroc), DegeneratePolicy::One)
        | (Err(MetricsError::DegenerateAupr), DegeneratePolicy::One) => Ok(1.0),
        (Err(e), _) => Err(e),
    };
    Ok(MetricReport {
        accuracy: accuracy(v),
        aurc: aurc(&curve),
        eaurc: eaurc(v),
        aorc: with_policy(aorc(v))?,
        auroc: with_policy(auroc(scores, v))?,
        aupr: with_policy(aupr(scores, v))?,
        n: v.len(),
        n_errors: v.n_errors(),
    })
}
