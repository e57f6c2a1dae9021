//! Measuring how much user demographics leak into recommender
//! representations and top-k recommendation lists.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`data`], [`io`], [`seed`]: the interaction data model, TSV files and
//!   seed derivation shared by everything else
//! * [`datagen`]: synthetic datasets with tunable group preference overlap
//! * [`recommenders`]: heuristic baselines and a small adversarially
//!   debiased autoencoder
//! * [`metrics`]: AUC-based leakage measures, item ratio and extended
//!   Kendall-Tau
//! * [`neural`]: the skip-gram + list-classifier leakage estimator
//! * [`harness`]: experiment configs, parameter sweeps and CSV reports

mod binfmt;
pub mod data;
pub mod datagen;
mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod neural;
mod nn;
pub mod recommenders;
pub mod seed;

pub use data::{
    minority_ratio, split_by_user, DatasetSplit, Group, InteractionDataset, ItemId, Provenance,
    RecommendationTable,
};
pub use error::{Error, Result};
pub use seed::SeedSpec;
