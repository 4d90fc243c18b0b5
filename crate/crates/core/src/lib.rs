//! Anomaly detection for histopathology slides over precomputed patch
//! embeddings.
//!
//! The crate covers the whole path from a slide raster to an evaluation
//! report:
//!
//! - [`tiler`] finds tissue and enumerates fixed-size patches.
//! - [`stainnorm`] applies Reinhard colour normalization in lαβ space.
//! - [`features`] stores patch embeddings and prepares outlier-exposure pools.
//! - [`models`] trains small heads with manual backprop and SGD.
//! - [`scoring`] turns embeddings into patch scores, slide scores and heatmaps.
//! - [`eval`] computes AUROC, folds and sensitivity thresholds.
//! - [`synth`] generates data with known ground truth.
//! - [`pipeline`] composes the above for the command-line tool.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod numfmt;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod scoring;
pub mod stainnorm;
pub mod synth;
pub mod tiler;

pub use error::{Error, Result};
