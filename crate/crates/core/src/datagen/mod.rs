//! Synthetic interaction data with controllable demographic structure.
//!
//! Users and items get points on a feature simplex drawn from Dirichlet
//! priors whose concentration is high on their category's feature block and
//! `epsilon` elsewhere. Candidate items are drawn per pair with probability
//! `t^(delta * (1 - density(pop_i)))` and each user keeps a long-tail sized
//! uniform sample of their candidates.

mod generator;
mod longtail;
pub mod stats;

pub use generator::{
    generate_candidates, generate_dataset, inclusion_probability, sample_dirichlet,
    sample_interactions, sample_latent_profiles, sample_popularity, utility, utility_normalizer,
    CandidateSets, GeneratorConfig, ItemPopularity, LatentProfiles, MOVIELENS_ITEM_POPULARITY,
    MOVIELENS_USER_COUNTS,
};
pub use longtail::{fit_log_normal, sample_long_tail, LongTailFamily, LongTailParams};
