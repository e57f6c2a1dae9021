//! Descriptive statistics of generated datasets.

use std::collections::HashSet;

use crate::data::{Group, InteractionDataset, ItemId};

/// The `n` items with the highest counts, ties by ascending index.
pub fn top_items(counts: &[u32], n: usize) -> Vec<ItemId> {
    let mut order: Vec<ItemId> = (0..counts.len() as ItemId).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

pub fn jaccard(a: &[ItemId], b: &[ItemId]) -> f64 {
    let a: HashSet<_> = a.iter().collect();
    let b: HashSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Jaccard overlap of the two groups' `n` most-interacted items.
pub fn group_top_overlap(dataset: &InteractionDataset, n: usize) -> f64 {
    jaccard(
        &top_items(&dataset.item_counts_in(Group::Majority), n),
        &top_items(&dataset.item_counts_in(Group::Minority), n),
    )
}

/// Total variation distance between the groups' item-interaction distributions.
pub fn group_total_variation(dataset: &InteractionDataset) -> f64 {
    let a = dataset.item_counts_in(Group::Majority);
    let b = dataset.item_counts_in(Group::Minority);
    let sa: f64 = a.iter().map(|&c| f64::from(c)).sum();
    let sb: f64 = b.iter().map(|&c| f64::from(c)).sum();
    0.5 * a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| (f64::from(x) / sa - f64::from(y) / sb).abs())
        .sum::<f64>()
}

/// Share of all interactions that fall on the top `fraction` of items.
pub fn head_share(dataset: &InteractionDataset, fraction: f64) -> f64 {
    let mut counts = dataset.item_counts();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let head = ((counts.len() as f64 * fraction).ceil() as usize).max(1);
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    counts[..head].iter().map(|&c| u64::from(c)).sum::<u64>() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_items_tie_break() {
        assert_eq!(top_items(&[2, 5, 2, 1], 3), vec![1, 0, 2]);
    }

    #[test]
    fn jaccard_bounds() {
        assert_eq!(jaccard(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(jaccard(&[1, 2], &[3]), 0.0);
        assert_eq!(jaccard(&[1, 2], &[2, 3]), 1.0 / 3.0);
    }
}
