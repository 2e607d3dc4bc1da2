//! Confidence estimation for image classifiers via test-time data augmentation.
//!
//! The crate is organized around a file-mediated pipeline:
//!
//! 1. [`dsl`] parses transformation chains ("hflip+right2+up1") and named
//!    transformation sets, including built-in per-dataset presets.
//! 2. [`image`] applies those chains to raster images to materialize the
//!    variant set for each input; [`netpbm`] reads and writes the P5/P6
//!    container used on disk.
//! 3. [`confidence`] turns per-variant softmax vectors into predictions and
//!    confidence scores (averaged softmax over all variants, with a top-5
//!    adaptation).
//! 4. [`bootstrap`] resamples the variant set to obtain score distributions,
//!    percentile intervals, and the sliding-window plurality ranking.
//! 5. [`metrics`] evaluates a confidence ranking with selective-classification
//!    metrics: RC curves, AURC, eAURC, AORC, AUROC, and AUPR.
//! 6. [`toy`] provides a deterministic centroid-softmax classifier and a
//!    synthetic dataset generator so the whole pipeline runs end to end
//!    without any external ML framework.
//!
//! All operations are pure functions of their inputs plus an explicit seed;
//! re-running any pipeline stage reproduces its output bit for bit.

pub mod bootstrap;
pub mod confidence;
pub mod csvio;
pub mod dsl;
pub mod image;
pub mod metrics;
pub mod netpbm;
pub mod rng;
pub mod toy;
