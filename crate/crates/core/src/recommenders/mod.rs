//! Recommenders: four heuristic baselines and a latent autoencoder.

mod baselines;
mod latent;

use std::fmt;
use std::str::FromStr;

use crate::data::{InteractionDataset, ItemId, RecommendationTable};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

pub use baselines::{
    recommend_dem_pop, recommend_max_division, recommend_pop, recommend_rand, Divisiveness, PopularityIndex,
    MAX_DIVISION_MIN_COUNT,
};
pub use latent::{
    batch_gradients, batch_losses, latent_recommend, latent_recommend_all, latent_representations, top_k_unseen,
    train_latent, EpochLoss, LatentHyper, LatentModel, LatentParams, RepresentationMatrix, TrainingRow,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    Pop,
    Rand,
    DemPop,
    MaxDivision,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Pop, Baseline::Rand, Baseline::DemPop, Baseline::MaxDivision];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Pop => "pop",
            Baseline::Rand => "rand",
            Baseline::DemPop => "dem_pop",
            Baseline::MaxDivision => "max_division",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
    }
}

/// Runs a baseline fitted on `train` for every user of `users`, using each
/// user's own history and group. RAND draws one stream per user index.
pub fn recommend_baseline(
    baseline: Baseline,
    train: &InteractionDataset,
    users: &InteractionDataset,
    k: usize,
    seed: SeedSpec,
) -> Result<RecommendationTable> {
    if train.n_items() != users.n_items() {
        return Err(Error::InvalidArgument(format!(
            "train has {} items, query set {}",
            train.n_items(),
            users.n_items()
        )));
    }
    let lists: Result<Vec<Vec<ItemId>>> = match baseline {
        Baseline::Pop => {
            let index = PopularityIndex::from_train(train);
            users.histories().iter().map(|h| recommend_pop(&index, h, k)).collect()
        }
        Baseline::Rand => (0..users.n_users())
            .map(|u| recommend_rand(users.n_items(), users.history(u), k, seed.derive_index("rand", u as u64)))
            .collect(),
        Baseline::DemPop => {
            let index = PopularityIndex::from_train(train);
            (0..users.n_users())
                .map(|u| recommend_dem_pop(&index, users.group(u), users.history(u), k))
                .collect()
        }
        Baseline::MaxDivision => {
            let div = Divisiveness::from_train(train, MAX_DIVISION_MIN_COUNT);
            (0..users.n_users())
                .map(|u| recommend_max_division(&div, users.group(u), users.history(u), k))
                .collect()
        }
    };
    RecommendationTable::new(k, lists?)
}
