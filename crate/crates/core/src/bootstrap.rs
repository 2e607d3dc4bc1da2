//! Bootstrap resampling of the variant set and the sliding-window plurality
//! ranking.
//!
//! For each image the variant records are resampled with replacement
//! `n_bs` times; applying the averaged-softmax confidence estimate to each
//! resample yields a score multiset per image. The plurality ranker then
//! merges all score multisets into a single confidence ordering: repeatedly
//! inspect the top `w_bs` surviving scores, rank the image that occurs most
//! often there, delete all of its scores, and continue.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::confidence::{ConfidenceError, SoftmaxRecord};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootstrapError {
    #[error("resample count {0} outside [1, 1000000]")]
    BadResampleCount(u64),
    #[error("window length must be at least 1")]
    BadWindow,
    #[error("no bootstrap scores provided")]
    Empty,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("images disagree on resample count ({a} vs {b})")]
    MismatchedResampleCounts { a: usize, b: usize },
    #[error("duplicate image id `{0}`")]
    DuplicateImageId(String),
    #[error("need at least 2 scores for a confidence interval (got {0})")]
    TooFewScores(usize),
    #[error("confidence level {0} must lie strictly between 0 and 1")]
    BadLevel(f64),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
}

/// A bootstrap parameter that is either fixed or derived from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    /// `n_bs`: derive from the transformation-set size; `w_bs`: use `n_bs`.
    Auto,
    Fixed(u32),
}

/// Bootstrap configuration prior to resolution against a concrete
/// transformation-set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_bs: Param,
    pub w_bs: Param,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn auto(seed: u64) -> Self {
        BootstrapConfig {
            n_bs: Param::Auto,
            w_bs: Param::Auto,
            seed,
        }
    }

    /// Resolves `Auto` parameters: `n_bs` defaults from the variant-set size
    /// `t_size` (identity included), `w_bs` defaults to `n_bs`.
    pub fn resolve(&self, t_size: usize) -> Result<ResolvedBootstrap, BootstrapError> {
        let n_bs = match self.n_bs {
            Param::Auto => default_n_bs(t_size),
            Param::Fixed(n) => {
                if n == 0 || n > 1_000_000 {
                    return Err(BootstrapError::BadResampleCount(n as u64));
                }
                n
            }
        };
        let w_bs = match self.w_bs {
            Param::Auto => n_bs,
            Param::Fixed(w) => {
                if w == 0 {
                    return Err(BootstrapError::BadWindow);
                }
                w
            }
        };
        Ok(ResolvedBootstrap {
            n_bs,
            w_bs,
            seed: self.seed,
        })
    }
}

/// Fully determined bootstrap parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedBootstrap {
    pub n_bs: u32,
    pub w_bs: u32,
    pub seed: u64,
}

/// Default resample count for a transformation set of size `t_size`:
/// `floor(min(1000, max(100, 0.001 * g)))` where
/// `g = (2t - 1)! / (t! * (t - 1)!)` counts the distinct multisets a
/// resampling can produce. Evaluated through log-gamma so large `t` cannot
/// overflow.
pub fn default_n_bs(t_size: usize) -> u32 {
    assert!(t_size >= 1, "transformation-set size must be positive");
    let t = t_size as f64;
    let ln_g = libm::lgamma(2.0 * t) - libm::lgamma(t + 1.0) - libm::lgamma(t);
    let ln_scaled = ln_g + 0.001f64.ln();
    if ln_scaled >= 1000f64.ln() {
        1000
    } else if ln_scaled <= 100f64.ln() {
        100
    } else {
        ln_scaled.exp().floor() as u32
    }
}

/// The bootstrap score multiset for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapScores {
    image_id: String,
    scores: Vec<f64>,
}

impl BootstrapScores {
    pub fn new(image_id: impl Into<String>, scores: Vec<f64>) -> Result<Self, BootstrapError> {
        if scores.is_empty() {
            return Err(BootstrapError::Empty);
        }
        for &s in &scores {
            if !(0.0..=1.0).contains(&s) {
                return Err(BootstrapError::ScoreOutOfRange(s));
            }
        }
        Ok(BootstrapScores {
            image_id: image_id.into(),
            scores,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// A confidence ordering over image ids, most confident first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    entries: Vec<String>,
}

impl RankedList {
    /// Builds a ranking from ids in most-confident-first order; ids must be
    /// unique and nonempty.
    pub fn from_entries(entries: Vec<String>) -> Result<Self, BootstrapError> {
        if entries.is_empty() {
            return Err(BootstrapError::Empty);
        }
        let mut seen = BTreeSet::new();
        for id in &entries {
            if !seen.insert(id.as_str()) {
                return Err(BootstrapError::DuplicateImageId(id.clone()));
            }
        }
        Ok(RankedList { entries })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scores standing in for a bare ranking when a metric needs numbers:
    /// the negated rank position, so position 0 scores highest.
    pub fn positional_scores(&self) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), -(i as f64)))
            .collect()
    }
}

/// Resamples one image's variant records with replacement `n_bs` times and
/// scores each resample as the mean softmax mass of the frozen class
/// `c_star`. The random stream is keyed by `(seed, image_id, resample)`, so
/// scheduling order is irrelevant.
pub fn bootstrap_scores(
    records: &[SoftmaxRecord],
    c_star: usize,
    config: &ResolvedBootstrap,
) -> Result<BootstrapScores, BootstrapError> {
    if records.is_empty() {
        return Err(ConfidenceError::NoRecords.into());
    }
    let image_id = records[0].image_id().to_string();
    let classes = records[0].class_count();
    for r in records {
        if r.image_id() != image_id {
            return Err(ConfidenceError::MixedImageIds {
                a: image_id.clone(),
                b: r.image_id().to_string(),
            }
            .into());
        }
        if r.class_count() != classes {
            return Err(ConfidenceError::InconsistentClassCount {
                a: classes,
                b: r.class_count(),
            }
            .into());
        }
    }
    if c_star >= classes {
        return Err(ConfidenceError::ClassOutOfRange {
            class: c_star,
            classes,
        }
        .into());
    }
    // Canonical variant order: resample indices must not depend on caller
    // ordering.
    let mut ordered: Vec<&SoftmaxRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.variant_id());
    let values: Vec<f64> = ordered.iter().map(|r| r.probs()[c_star]).collect();

    let n = values.len();
    let mut scores = Vec::with_capacity(config.n_bs as usize);
    for b in 0..config.n_bs as u64 {
        let mut stream = rng::stream(
            config.seed,
            &[b"bootstrap", image_id.as_bytes(), &b.to_le_bytes()],
        );
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng::uniform_index(&mut stream, n)];
        }
        scores.push(sum / n as f64);
    }
    BootstrapScores::new(image_id, scores)
}

/// Empirical percentile interval `[(1-level)/2, 1-(1-level)/2]` with linear
/// interpolation between order statistics.
pub fn confidence_interval(
    scores: &BootstrapScores,
    level: f64,
) -> Result<(f64, f64), BootstrapError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BootstrapError::BadLevel(level));
    }
    let n = scores.scores.len();
    if n < 2 {
        return Err(BootstrapError::TooFewScores(n));
    }
    let mut sorted = scores.scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Sliding-window plurality ranking over all images' bootstrap scores.
///
/// All `N * n_bs` (score, image) pairs are sorted once, descending by score
/// with ties broken by lexicographically smaller image id and then smaller
/// resample index. Each round inspects the first `w_bs` surviving entries
/// (the full remainder when fewer are left), ranks the image with the most
/// occurrences in that window — plurality ties go to the candidate whose
/// earliest occurrence comes first — and deletes all of its entries.
pub fn plurality_rank(
    all_scores: &[BootstrapScores],
    w_bs: u32,
) -> Result<RankedList, BootstrapError> {
    if all_scores.is_empty() {
        return Err(BootstrapError::Empty);
    }
    if w_bs == 0 {
        return Err(BootstrapError::BadWindow);
    }
    let n_bs = all_scores[0].scores.len();
    for s in all_scores {
        if s.scores.len() != n_bs {
            return Err(BootstrapError::MismatchedResampleCounts {
                a: n_bs,
                b: s.scores.len(),
            });
        }
    }
    let mut ids = BTreeSet::new();
    for s in all_scores {
        if !ids.insert(s.image_id.as_str()) {
            return Err(BootstrapError::DuplicateImageId(s.image_id.clone()));
        }
    }
    // Image index in id-sorted order, so comparing indices is comparing ids.
    let sorted_ids: Vec<&str> = ids.into_iter().collect();
    let index_of = |id: &str| sorted_ids.binary_search(&id).expect("id present");

    let mut entries: Vec<(f64, u32, u32)> = Vec::with_capacity(all_scores.len() * n_bs);
    for s in all_scores {
        let img = index_of(&s.image_id) as u32;
        for (b, &score) in s.scores.iter().enumerate() {
            entries.push((score, img, b as u32));
        }
    }
    entries.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    // Doubly linked alive-list over the sorted entries; deleting a ranked
    // image's occurrences never touches the relative order of survivors.
    let m = entries.len();
    let mut next: Vec<u32> = (1..=m as u32).collect();
    let mut prev: Vec<u32> = (0..m as u32).collect();
    let mut head = 0u32;
    let mut occurrences: Vec<Vec<u32>> = vec![Vec::new(); sorted_ids.len()];
    for (pos, &(_, img, _)) in entries.iter().enumerate() {
        occurrences[img as usize].push(pos as u32);
    }

    let mut counts: Vec<u32> = vec![0; sorted_ids.len()];
    let mut first_seen: Vec<u32> = vec![0; sorted_ids.len()];
    let mut ranked = Vec::with_capacity(sorted_ids.len());
    let mut remaining = sorted_ids.len();
    while remaining > 0 {
        let mut touched: Vec<u32> = Vec::new();
        let mut cursor = head;
        let mut seen = 0u32;
        let mut window_pos = 0u32;
        while (cursor as usize) < m && seen < w_bs {
            let img = entries[cursor as usize].1;
            if counts[img as usize] == 0 {
                touched.push(img);
                first_seen[img as usize] = window_pos;
            }
            counts[img as usize] += 1;
            seen += 1;
            window_pos += 1;
            cursor = next[cursor as usize];
        }
        let winner = touched
            .iter()
            .copied()
            .max_by(|&a, &b| {
                counts[a as usize]
                    .cmp(&counts[b as usize])
                    .then(first_seen[b as usize].cmp(&first_seen[a as usize]))
            })
            .expect("window is nonempty while images remain");
        ranked.push(sorted_ids[winner as usize].to_string());
        for &pos in &occurrences[winner as usize] {
            let (p, n) = (prev[pos as usize], next[pos as usize]);
            if pos == head {
                head = n;
            } else {
                next[p as usize] = n;
            }
            if (n as usize) < m {
                prev[n as usize] = p;
            }
        }
        for img in touched {
            counts[img as usize] = 0;
        }
        remaining -= 1;
    }
    Ok(RankedList { entries: ranked })
}

/// Plain score ranking: descending by score, ties to the lexicographically
/// smaller image id.
pub fn rank_from_scores(scores: &BTreeMap<String, f64>) -> Result<RankedList, BootstrapError> {
    if scores.is_empty() {
        return Err(BootstrapError::Empty);
    }
    for (_, &s) in scores.iter() {
        if s.is_nan() {
            return Err(BootstrapError::ScoreOutOfRange(s));
        }
    }
    let mut items: Vec<(&String, f64)> = scores.iter().map(|(id, &s)| (id, s)).collect();
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("no NaN").then(a.0.cmp(b.0)));
    Ok(RankedList {
        entries: items.into_iter().map(|(id, _)| id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::SoftmaxRecord;

    fn scores(id: &str, values: &[f64]) -> BootstrapScores {
        BootstrapScores::new(id, values.to_vec()).unwrap()
    }

    #[test]
    fn default_n_bs_matches_clamps() {
        assert_eq!(default_n_bs(13), 1000);
        assert_eq!(default_n_bs(3), 100);
        assert_eq!(default_n_bs(11), 352);
        assert_eq!(default_n_bs(1), 100);
        assert_eq!(default_n_bs(500), 1000); // far past the clamp, no overflow
    }

    #[test]
    fn default_n_bs_is_monotone_and_bounded() {
        let mut last = 0;
        for t in 1..=200 {
            let n = default_n_bs(t);
            assert!((100..=1000).contains(&n));
            assert!(n >= last, "not monotone at t={t}");
            last = n;
        }
    }

    #[test]
    fn constant_records_bootstrap_to_constant_scores() {
        let records: Vec<SoftmaxRecord> = (0..4)
            .map(|v| SoftmaxRecord::new("img", v, vec![0.8, 0.2]).unwrap())
            .collect();
        let config = ResolvedBootstrap { n_bs: 50, w_bs: 50, seed: 1 };
        let bs = bootstrap_scores(&records, 0, &config).unwrap();
        assert_eq!(bs.scores().len(), 50);
        assert!(bs.scores().iter().all(|&s| s == 0.8));
    }

    #[test]
    fn single_variant_bootstrap_is_degenerate() {
        let records = vec![SoftmaxRecord::new("img", 0, vec![0.6, 0.4]).unwrap()];
        let config = ResolvedBootstrap { n_bs: 10, w_bs: 10, seed: 3 };
        let bs = bootstrap_scores(&records, 0, &config).unwrap();
        assert!(bs.scores().iter().all(|&s| s == 0.6));
    }

    #[test]
    fn bootstrap_mean_approaches_population_mean() {
        // Half the variants score 0, half score 1; each bootstrap score is a
        // mean of 8 Bernoulli(1/2) draws, so the grand mean over n_bs = 1000
        // scores has sigma = sqrt(0.25 / 8 / 1000) ~ 0.0056.
        let records: Vec<SoftmaxRecord> = (0..8)
            .map(|v| {
                let p = if v % 2 == 0 { 0.0 } else { 1.0 };
                SoftmaxRecord::new("img", v, vec![p, 1.0 - p]).unwrap()
            })
            .collect();
        let config = ResolvedBootstrap { n_bs: 1000, w_bs: 1000, seed: 11 };
        let bs = bootstrap_scores(&records, 0, &config).unwrap();
        let mean = bs.scores().iter().sum::<f64>() / bs.scores().len() as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.0056, "mean {mean}");
    }

    #[test]
    fn bootstrap_is_deterministic_and_order_independent() {
        let mut records: Vec<SoftmaxRecord> = (0..5)
            .map(|v| SoftmaxRecord::new("img", v, vec![0.1 * (v + 1) as f64, 1.0 - 0.1 * (v + 1) as f64]).unwrap())
            .collect();
        let config = ResolvedBootstrap { n_bs: 20, w_bs: 20, seed: 5 };
        let a = bootstrap_scores(&records, 0, &config).unwrap();
        records.reverse();
        let b = bootstrap_scores(&records, 0, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_of_constant_scores_is_degenerate() {
        let bs = scores("a", &[0.4; 10]);
        assert_eq!(confidence_interval(&bs, 0.9).unwrap(), (0.4, 0.4));
    }

    #[test]
    fn interval_on_uniform_grid() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let bs = scores("a", &grid);
        let (lo, hi) = confidence_interval(&bs, 0.9).unwrap();
        assert!((lo - 0.05).abs() < 1e-12);
        assert!((hi - 0.95).abs() < 1e-12);
    }

    #[test]
    fn interval_rejects_degenerate_inputs() {
        let bs = scores("a", &[0.5]);
        assert!(matches!(
            confidence_interval(&bs, 0.9),
            Err(BootstrapError::TooFewScores(1))
        ));
        let bs = scores("a", &[0.5, 0.6]);
        assert!(matches!(
            confidence_interval(&bs, 1.0),
            Err(BootstrapError::BadLevel(_))
        ));
    }

    #[test]
    fn plurality_rank_hand_traced_fixture() {
        // Sorted: [A .9, B .85, A .8, A .7, B .6, B .5]; window of 3 holds
        // {A, B, A} -> A ranks first, the remainder is all B.
        let all = vec![
            scores("A", &[0.9, 0.8, 0.7]),
            scores("B", &[0.85, 0.6, 0.5]),
        ];
        let ranked = plurality_rank(&all, 3).unwrap();
        assert_eq!(ranked.entries(), ["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn plurality_rank_single_image() {
        let all = vec![scores("only", &[0.2, 0.3])];
        let ranked = plurality_rank(&all, 5).unwrap();
        assert_eq!(ranked.entries(), ["only".to_string()]);
    }

    #[test]
    fn plurality_tie_goes_to_earliest_occurrence() {
        // Equal scores: the sort puts A ahead lexicographically, and the
        // 1-1 count tie resolves to the earliest window occurrence.
        let all = vec![scores("A", &[0.9]), scores("B", &[0.9])];
        let ranked = plurality_rank(&all, 2).unwrap();
        assert_eq!(ranked.entries(), ["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn plurality_rejects_mismatched_counts() {
        let all = vec![scores("A", &[0.9]), scores("B", &[0.9, 0.8])];
        assert!(matches!(
            plurality_rank(&all, 2),
            Err(BootstrapError::MismatchedResampleCounts { .. })
        ));
    }

    #[test]
    fn plurality_rejects_duplicate_ids() {
        let all = vec![scores("A", &[0.9]), scores("A", &[0.8])];
        assert!(matches!(
            plurality_rank(&all, 2),
            Err(BootstrapError::DuplicateImageId(_))
        ));
    }

    #[test]
    fn plurality_output_is_a_permutation() {
        let all: Vec<BootstrapScores> = (0..20)
            .map(|i| {
                let base = (i as f64) / 25.0;
                scores(&format!("img{i:02}"), &[base, base + 0.02, base + 0.04])
            })
            .collect();
        let ranked = plurality_rank(&all, 7).unwrap();
        let mut seen: Vec<&str> = ranked.entries().iter().map(|s| s.as_str()).collect();
        seen.sort_unstable();
        let mut expected: Vec<String> = (0..20).map(|i| format!("img{i:02}")).collect();
        expected.sort();
        assert_eq!(seen, expected.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    }

    #[test]
    fn plurality_with_unit_parameters_matches_score_sort() {
        let all = vec![
            scores("c", &[0.31]),
            scores("a", &[0.77]),
            scores("b", &[0.77]),
            scores("d", &[0.05]),
        ];
        let ranked = plurality_rank(&all, 1).unwrap();
        let map: BTreeMap<String, f64> = all
            .iter()
            .map(|s| (s.image_id().to_string(), s.scores()[0]))
            .collect();
        assert_eq!(ranked, rank_from_scores(&map).unwrap());
        assert_eq!(ranked.entries(), ["a", "b", "c", "d"]);
    }

    #[test]
    fn rank_from_scores_sorts_and_breaks_ties() {
        let mut map = BTreeMap::new();
        map.insert("A".to_string(), 0.6);
        map.insert("B".to_string(), 0.9);
        let ranked = rank_from_scores(&map).unwrap();
        assert_eq!(ranked.entries(), ["B", "A"]);
        let mut tie = BTreeMap::new();
        tie.insert("z".to_string(), 0.5);
        tie.insert("y".to_string(), 0.5);
        assert_eq!(rank_from_scores(&tie).unwrap().entries(), ["y", "z"]);
        let single = BTreeMap::from([("only".to_string(), 0.1)]);
        assert_eq!(rank_from_scores(&single).unwrap().entries(), ["only"]);
    }

    #[test]
    fn config_resolution() {
        let config = BootstrapConfig::auto(9);
        let resolved = config.resolve(13).unwrap();
        assert_eq!(resolved.n_bs, 1000);
        assert_eq!(resolved.w_bs, 1000);
        let fixed = BootstrapConfig {
            n_bs: Param::Fixed(10),
            w_bs: Param::Auto,
            seed: 9,
        };
        assert_eq!(fixed.resolve(13).unwrap().w_bs, 10);
        let bad = BootstrapConfig {
            n_bs: Param::Fixed(0),
            w_bs: Param::Auto,
            seed: 9,
        };
        assert!(bad.resolve(13).is_err());
    }

    #[test]
    fn positional_scores_descend_by_rank() {
        let ranked = RankedList {
            entries: vec!["x".into(), "y".into()],
        };
        let scores = ranked.positional_scores();
        assert_eq!(scores["x"], 0.0);
        assert_eq!(scores["y"], -1.0);
    }
}
