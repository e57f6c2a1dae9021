//! Heuristic baselines: popularity, random, per-group popularity and the
//! most demographically divisive items.

use rand::seq::index;

use crate::data::{Group, InteractionDataset, ItemId};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Minimum training count for an item to be considered by Max Division.
pub const MAX_DIVISION_MIN_COUNT: u32 = 5;

/// Training interaction counts, overall and per group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopularityIndex {
    pub total: Vec<u32>,
    pub majority: Vec<u32>,
    pub minority: Vec<u32>,
}

impl PopularityIndex {
    pub fn from_train(train: &InteractionDataset) -> Self {
        PopularityIndex {
            total: train.item_counts(),
            majority: train.item_counts_in(Group::Majority),
            minority: train.item_counts_in(Group::Minority),
        }
    }

    pub fn for_group(&self, group: Group) -> &[u32] {
        match group {
            Group::Majority => &self.majority,
            Group::Minority => &self.minority,
        }
    }

    pub fn n_items(&self) -> usize {
        self.total.len()
    }
}

/// Item indices sorted by a key, ties by ascending index.
pub(crate) fn ranked_by<K: Ord>(n_items: usize, key: impl Fn(usize) -> K) -> Vec<ItemId> {
    let mut order: Vec<ItemId> = (0..n_items as ItemId).collect();
    order.sort_by(|&a, &b| key(a as usize).cmp(&key(b as usize)).then(a.cmp(&b)));
    order
}

/// The first `k` items of `order` that are not in the (sorted) history.
pub(crate) fn take_unseen(order: &[ItemId], history: &[ItemId], k: usize) -> Result<Vec<ItemId>> {
    let picked: Vec<ItemId> = order
        .iter()
        .copied()
        .filter(|i| history.binary_search(i).is_err())
        .take(k)
        .collect();
    if picked.len() < k {
        return Err(Error::InsufficientItems {
            needed: k,
            available: picked.len(),
        });
    }
    Ok(picked)
}

fn popularity_order(counts: &[u32]) -> Vec<ItemId> {
    ranked_by(counts.len(), |i| std::cmp::Reverse(counts[i]))
}

/// The `k` most popular training items outside the user's history.
pub fn recommend_pop(index: &PopularityIndex, history: &[ItemId], k: usize) -> Result<Vec<ItemId>> {
    take_unseen(&popularity_order(&index.total), history, k)
}

/// `k` items drawn uniformly without replacement from outside the history.
pub fn recommend_rand(n_items: usize, history: &[ItemId], k: usize, seed: SeedSpec) -> Result<Vec<ItemId>> {
    let eligible: Vec<ItemId> = (0..n_items as ItemId)
        .filter(|i| history.binary_search(i).is_err())
        .collect();
    if eligible.len() < k {
        return Err(Error::InsufficientItems {
            needed: k,
            available: eligible.len(),
        });
    }
    let mut rng = seed.rng();
    Ok(index::sample(&mut rng, eligible.len(), k)
        .into_iter()
        .map(|j| eligible[j])
        .collect())
}

/// The `k` most popular items within the user's group.
pub fn recommend_dem_pop(
    index: &PopularityIndex,
    group: Group,
    history: &[ItemId],
    k: usize,
) -> Result<Vec<ItemId>> {
    take_unseen(&popularity_order(index.for_group(group)), history, k)
}

/// Per-item divisiveness `DemographicRatio(i) - minority_ratio`, computed as
/// an exact rational so that swapping group labels negates it exactly.
/// Items below the count threshold are `None`.
#[derive(Clone, Debug)]
pub struct Divisiveness {
    values: Vec<Option<f64>>,
}

impl Divisiveness {
    pub fn from_train(train: &InteractionDataset, min_count: u32) -> Self {
        let index = PopularityIndex::from_train(train);
        let users = train.n_users() as i64;
        let minority_users = train.group_size(Group::Minority) as i64;
        let values = index
            .total
            .iter()
            .zip(&index.minority)
            .map(|(&t, &m)| {
                (t >= min_count.max(1)).then(|| {
                    let numerator = i64::from(m) * users - minority_users * i64::from(t);
                    numerator as f64 / (i64::from(t) * users) as f64
                })
            })
            .collect();
        Divisiveness { values }
    }

    pub fn value(&self, item: ItemId) -> Option<f64> {
        self.values[item as usize]
    }

    /// Eligible items in the order a group receives them: most positive
    /// first for the minority, most negative first for the majority.
    pub fn order_for(&self, group: Group) -> Vec<ItemId> {
        let mut eligible: Vec<(ItemId, f64)> = self
            .values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i as ItemId, v)))
            .collect();
        eligible.sort_by(|a, b| {
            let ord = match group {
                Group::Minority => b.1.total_cmp(&a.1),
                Group::Majority => a.1.total_cmp(&b.1),
            };
            ord.then(a.0.cmp(&b.0))
        });
        eligible.into_iter().map(|e| e.0).collect()
    }
}

/// The `k` most divisive items favoured by the user's group.
pub fn recommend_max_division(
    divisiveness: &Divisiveness,
    group: Group,
    history: &[ItemId],
    k: usize,
) -> Result<Vec<ItemId>> {
    take_unseen(&divisiveness.order_for(group), history, k)
}
