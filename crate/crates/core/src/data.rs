//! Interaction data model shared by generators, recommenders and metrics.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

pub type ItemId = u32;

/// Binary demographic group. `Minority` is always the (weakly) smaller group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Majority,
    Minority,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::Majority => 0,
            Group::Minority => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Group> {
        match label {
            0 => Some(Group::Majority),
            1 => Some(Group::Minority),
            _ => None,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::Majority => Group::Minority,
            Group::Minority => Group::Majority,
        }
    }

    pub fn is_minority(self) -> bool {
        self == Group::Minority
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Majority => f.write_str("majority"),
            Group::Minority => f.write_str("minority"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic,
    Ingested,
}

/// Users, items, binary interactions and one demographic label per user.
///
/// Users and items are dense indices. Each user's history is kept sorted and
/// free of duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDataset {
    n_items: usize,
    histories: Vec<Vec<ItemId>>,
    groups: Vec<Group>,
    provenance: Provenance,
}

impl InteractionDataset {
    /// Builds a dataset and canonicalizes labels so that `Minority` is the
    /// smaller group (ties go to label 1).
    pub fn new(
        n_items: usize,
        histories: Vec<Vec<ItemId>>,
        groups: Vec<Group>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut dataset = Self::new_uncanonical(n_items, histories, groups, provenance)?;
        dataset.canonicalize();
        Ok(dataset)
    }

    /// Builds a dataset keeping the labels exactly as given. Used for subsets
    /// of an already canonical dataset, where relabeling would be wrong.
    pub fn new_uncanonical(
        n_items: usize,
        mut histories: Vec<Vec<ItemId>>,
        groups: Vec<Group>,
        provenance: Provenance,
    ) -> Result<Self> {
        if histories.len() != groups.len() {
            return Err(Error::InvalidArgument(format!(
                "{} histories but {} labels",
                histories.len(),
                groups.len()
            )));
        }
        if histories.iter().all(Vec::is_empty) {
            return Err(Error::NoInteractions);
        }
        for (user, items) in histories.iter_mut().enumerate() {
            if items.is_empty() {
                return Err(Error::EmptyUser { user });
            }
            items.sort_unstable();
            let before = items.len();
            items.dedup();
            if items.len() != before {
                return Err(Error::InvalidArgument(format!(
                    "user {user} has duplicate interactions"
                )));
            }
            if let Some(&last) = items.last() {
                if last as usize >= n_items {
                    return Err(Error::InvalidArgument(format!(
                        "item {last} out of range for {n_items} items"
                    )));
                }
            }
        }
        Ok(InteractionDataset {
            n_items,
            histories,
            groups,
            provenance,
        })
    }

    fn canonicalize(&mut self) {
        let minority = self.groups.iter().filter(|g| g.is_minority()).count();
        let majority = self.groups.len() - minority;
        if minority > majority {
            for g in &mut self.groups {
                *g = g.other();
            }
        }
    }

    pub fn n_users(&self) -> usize {
        self.histories.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_interactions(&self) -> usize {
        self.histories.iter().map(Vec::len).sum()
    }

    pub fn history(&self, user: usize) -> &[ItemId] {
        &self.histories[user]
    }

    pub fn histories(&self) -> &[Vec<ItemId>] {
        &self.histories
    }

    pub fn group(&self, user: usize) -> Group {
        self.groups[user]
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn users_in(&self, group: Group) -> impl Iterator<Item = usize> + '_ {
        self.groups
            .iter()
            .enumerate()
            .filter(move |(_, g)| **g == group)
            .map(|(u, _)| u)
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.groups.iter().filter(|g| **g == group).count()
    }

    /// |U_minority| / |U|.
    pub fn minority_ratio(&self) -> f64 {
        self.group_size(Group::Minority) as f64 / self.n_users() as f64
    }

    /// Per-item interaction counts.
    pub fn item_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_items];
        for items in &self.histories {
            for &i in items {
                counts[i as usize] += 1;
            }
        }
        counts
    }

    /// Per-item interaction counts restricted to one group.
    pub fn item_counts_in(&self, group: Group) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_items];
        for user in self.users_in(group) {
            for &i in &self.histories[user] {
                counts[i as usize] += 1;
            }
        }
        counts
    }

    /// Subset of users, re-indexed densely in the given order. Labels are kept.
    pub fn select_users(&self, users: &[usize]) -> Result<InteractionDataset> {
        let histories = users.iter().map(|&u| self.histories[u].clone()).collect();
        let groups = users.iter().map(|&u| self.groups[u]).collect();
        InteractionDataset::new_uncanonical(self.n_items, histories, groups, self.provenance)
    }

    /// Same interactions with every label replaced. No canonicalization.
    pub fn with_groups(&self, groups: Vec<Group>) -> Result<InteractionDataset> {
        InteractionDataset::new_uncanonical(
            self.n_items,
            self.histories.clone(),
            groups,
            self.provenance,
        )
    }
}

/// Free-function form of [`InteractionDataset::minority_ratio`].
pub fn minority_ratio(dataset: &InteractionDataset) -> f64 {
    dataset.minority_ratio()
}

/// User-disjoint train/test partition.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
    /// Original index of each train user.
    pub train_users: Vec<usize>,
    /// Original index of each test user.
    pub test_users: Vec<usize>,
    pub test_ratio: f64,
}

/// Stratified user-level split: each demographic group contributes
/// `round(n_group * test_ratio)` users to the test side, clamped so both
/// sides keep at least one user of each group.
pub fn split_by_user(
    dataset: &InteractionDataset,
    test_ratio: f64,
    seed: SeedSpec,
) -> Result<DatasetSplit> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_ratio must be in (0, 1), got {test_ratio}"
        )));
    }
    let mut train_users = Vec::new();
    let mut test_users = Vec::new();
    for group in [Group::Majority, Group::Minority] {
        let mut members: Vec<usize> = dataset.users_in(group).collect();
        if members.len() < 2 {
            return Err(Error::TooFewUsers {
                group,
                needed: 2,
                found: members.len(),
            });
        }
        let mut rng = seed.derive_index("split", u64::from(group.label())).rng();
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_ratio).round() as usize).clamp(1, members.len() - 1);
        test_users.extend_from_slice(&members[..n_test]);
        train_users.extend_from_slice(&members[n_test..]);
    }
    train_users.sort_unstable();
    test_users.sort_unstable();
    Ok(DatasetSplit {
        train: dataset.select_users(&train_users)?,
        test: dataset.select_users(&test_users)?,
        train_users,
        test_users,
        test_ratio,
    })
}

/// Per-user ranked top-k lists. Row `u` belongs to user `u` of the dataset
/// the table was produced for; rank 1 is the first element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecommendationTable {
    k: usize,
    lists: Vec<Vec<ItemId>>,
}

impl RecommendationTable {
    pub fn new(k: usize, lists: Vec<Vec<ItemId>>) -> Result<Self> {
        for list in &lists {
            if list.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "list of length {} in a top-{k} table",
                    list.len()
                )));
            }
            check_distinct(list)?;
        }
        Ok(RecommendationTable { k, lists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, user: usize) -> &[ItemId] {
        &self.lists[user]
    }

    pub fn lists(&self) -> &[Vec<ItemId>] {
        &self.lists
    }

    /// Checks that no list contains an item from the user's history.
    pub fn check_against(&self, dataset: &InteractionDataset) -> Result<()> {
        if dataset.n_users() != self.n_users() {
            return Err(Error::InvalidArgument(format!(
                "table has {} users, dataset {}",
                self.n_users(),
                dataset.n_users()
            )));
        }
        for (user, list) in self.lists.iter().enumerate() {
            let history = dataset.history(user);
            if let Some(item) = list.iter().find(|i| history.binary_search(i).is_ok()) {
                return Err(Error::InvalidArgument(format!(
                    "item {item} recommended to user {user} who already interacted with it"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_distinct(list: &[ItemId]) -> Result<()> {
    let mut sorted = list.to_vec();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::DuplicateItem { item: pair[0] });
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn toy_dataset(n_items: usize, rows: &[(&[ItemId], u8)]) -> InteractionDataset {
    let histories = rows.iter().map(|(h, _)| h.to_vec()).collect();
    let groups = rows
        .iter()
        .map(|(_, g)| Group::from_label(*g).unwrap())
        .collect();
    InteractionDataset::new_uncanonical(n_items, histories, groups, Provenance::Synthetic).unwrap()
}
