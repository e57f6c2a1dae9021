use std::collections::HashMap;

use crate::data::{check_distinct, Group, ItemId, RecommendationTable};
use crate::error::{Error, Result};

/// Occurrence-ranked top-k items of one group's recommendations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAggregateRanking {
    pub group: Group,
    pub items: Vec<ItemId>,
    pub counts: Vec<u32>,
}

/// Counts how often each item appears in the group's lists and keeps the
/// `k` most frequent, ties by ascending item index.
pub fn aggregate_group_ranking(
    recs: &RecommendationTable,
    labels: &[Group],
    group: Group,
    k: usize,
) -> Result<GroupAggregateRanking> {
    if recs.n_users() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recommendation lists for {} labels",
            recs.n_users(),
            labels.len()
        )));
    }
    let mut counts: HashMap<ItemId, u32> = HashMap::new();
    let mut members = 0;
    for (list, _) in recs.lists().iter().zip(labels).filter(|(_, g)| **g == group) {
        members += 1;
        for &item in list {
            *counts.entry(item).or_default() += 1;
        }
    }
    if members == 0 {
        return Err(Error::EmptyGroup(group));
    }
    let mut ranked: Vec<(ItemId, u32)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(GroupAggregateRanking {
        group,
        items: ranked.iter().map(|r| r.0).collect(),
        counts: ranked.iter().map(|r| r.1).collect(),
    })
}

/// Kendall-Tau over top-k lists with different item sets.
///
/// Every unordered pair from the union of both lists is scored: concordant
/// when both items appear in both lists in the same relative order,
/// discordant otherwise (opposite order, or an item missing from a list).
/// The result is `(C - D) / (|U| choose 2)`: 1 for identical lists, -1 for
/// disjoint ones.
pub fn kendall_tau_extended(list_a: &[ItemId], list_b: &[ItemId]) -> Result<f64> {
    if list_a.is_empty() || list_b.is_empty() {
        return Err(Error::InvalidArgument("ranked lists must be nonempty".into()));
    }
    check_distinct(list_a)?;
    check_distinct(list_b)?;
    let rank_a: HashMap<ItemId, usize> = list_a.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let rank_b: HashMap<ItemId, usize> = list_b.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let mut union: Vec<ItemId> = list_a.to_vec();
    union.extend(list_b.iter().filter(|i| !rank_a.contains_key(i)));

    let n = union.len();
    if n == 1 {
        return Ok(1.0);
    }
    let mut concordant: i64 = 0;
    let mut discordant: i64 = 0;
    for (p, x) in union.iter().enumerate() {
        for y in &union[p + 1..] {
            match (rank_a.get(x), rank_a.get(y), rank_b.get(x), rank_b.get(y)) {
                (Some(ax), Some(ay), Some(bx), Some(by)) if (ax < ay) == (bx < by) => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / pairs)
}

/// Extended Kendall-Tau between the majority and minority aggregate top-k.
pub fn group_kendall_tau(recs: &RecommendationTable, labels: &[Group], k: usize) -> Result<f64> {
    let majority = aggregate_group_ranking(recs, labels, Group::Majority, k)?;
    let minority = aggregate_group_ranking(recs, labels, Group::Minority, k)?;
    kendall_tau_extended(&majority.items, &minority.items)
}
