//! Hyperparameter importance across datasets.
//!
//! Fits regression-forest surrogates to per-dataset performance records,
//! decomposes their variance with functional ANOVA, aggregates importance
//! across datasets with rank statistics, learns 1-D sampling priors from
//! top-performing configurations and evaluates them inside Hyperband.

pub mod configspace;
pub mod error;
pub mod fanova;
pub mod forest;
pub mod optimize;
pub mod pipeline;
pub mod priors;
pub mod rundata;
pub mod stats;

pub use error::{Error, Result};
