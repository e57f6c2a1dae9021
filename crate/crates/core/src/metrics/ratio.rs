use crate::data::{Group, InteractionDataset, ItemId, RecommendationTable};
use crate::error::{Error, Result};

use super::auc::{auc_from_scores, ScoredLabels};

/// Per-item share of training interactions made by minority users.
#[derive(Clone, Debug, PartialEq)]
pub struct DemographicRatioTable {
    ratios: Vec<f64>,
    counts: Vec<u32>,
    minority_ratio: f64,
}

impl DemographicRatioTable {
    pub fn from_train(train: &InteractionDataset) -> Self {
        let counts = train.item_counts();
        let minority = train.item_counts_in(Group::Minority);
        let minority_ratio = train.minority_ratio();
        let ratios = counts
            .iter()
            .zip(&minority)
            .map(|(&total, &m)| {
                if total == 0 {
                    minority_ratio
                } else {
                    f64::from(m) / f64::from(total)
                }
            })
            .collect();
        DemographicRatioTable {
            ratios,
            counts,
            minority_ratio,
        }
    }

    pub fn ratio(&self, item: ItemId) -> f64 {
        self.ratios[item as usize]
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn count(&self, item: ItemId) -> u32 {
        self.counts[item as usize]
    }

    /// True when the item had no training interactions and carries the
    /// dataset minority ratio as a fallback.
    pub fn is_fallback(&self, item: ItemId) -> bool {
        self.counts[item as usize] == 0
    }

    pub fn minority_ratio(&self) -> f64 {
        self.minority_ratio
    }

    pub fn n_items(&self) -> usize {
        self.ratios.len()
    }
}

/// Demographic ratio of one item; zero-count items get the dataset minority
/// ratio and `true` as the fallback flag.
pub fn demographic_ratio(train: &InteractionDataset, item: ItemId) -> (f64, bool) {
    let (mut total, mut minority) = (0u32, 0u32);
    for (user, history) in train.histories().iter().enumerate() {
        if history.binary_search(&item).is_ok() {
            total += 1;
            if train.group(user).is_minority() {
                minority += 1;
            }
        }
    }
    if total == 0 {
        (train.minority_ratio(), true)
    } else {
        (f64::from(minority) / f64::from(total), false)
    }
}

/// Median with the even-length convention of averaging the two central values.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-user median demographic ratio of the recommended items.
pub fn median_ratio_scores(table: &DemographicRatioTable, recs: &RecommendationTable) -> Vec<f64> {
    recs.lists()
        .iter()
        .map(|list| {
            let mut ratios: Vec<f64> = list.iter().map(|&i| table.ratio(i)).collect();
            median(&mut ratios)
        })
        .collect()
}

/// AUC of predicting the minority group from the median demographic ratio
/// of each user's recommendations.
pub fn demographic_ratio_auc(
    table: &DemographicRatioTable,
    recs: &RecommendationTable,
    labels: &[Group],
) -> Result<f64> {
    if recs.n_users() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recommendation lists for {} labels",
            recs.n_users(),
            labels.len()
        )));
    }
    let scores = median_ratio_scores(table, recs);
    auc_from_scores(&ScoredLabels::new(scores, labels.to_vec())?)
}

/// Mean absolute deviation between each item's minority share of
/// recommendations and the dataset minority ratio, over items recommended to
/// at least `min_rec_count` users.
pub fn item_ratio(
    recs: &RecommendationTable,
    labels: &[Group],
    minority_ratio: f64,
    min_rec_count: usize,
) -> Result<f64> {
    if recs.n_users() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recommendation lists for {} labels",
            recs.n_users(),
            labels.len()
        )));
    }
    let n_items = recs
        .lists()
        .iter()
        .flatten()
        .map(|&i| i as usize + 1)
        .max()
        .unwrap_or(0);
    let mut total = vec![0usize; n_items];
    let mut minority = vec![0usize; n_items];
    for (list, group) in recs.lists().iter().zip(labels) {
        for &item in list {
            total[item as usize] += 1;
            if group.is_minority() {
                minority[item as usize] += 1;
            }
        }
    }
    let deviations: Vec<f64> = total
        .iter()
        .zip(&minority)
        .filter(|(&t, _)| t >= min_rec_count.max(1))
        .map(|(&t, &m)| (m as f64 / t as f64 - minority_ratio).abs())
        .collect();
    if deviations.is_empty() {
        return Err(Error::NoQualifyingItems {
            min_count: min_rec_count,
        });
    }
    Ok(deviations.iter().sum::<f64>() / deviations.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy_dataset;

    #[test]
    fn ratio_examples() {
        // item 0: 2 minority + 2 majority, item 2: none
        let rows: Vec<(&[ItemId], u8)> = vec![(&[0, 1], 1), (&[0, 1], 1), (&[0], 0), (&[0], 0), (&[1], 0)];
        let ds = toy_dataset(3, &rows);
        assert_eq!(demographic_ratio(&ds, 0), (0.5, false));
        assert_eq!(demographic_ratio(&ds, 2), (ds.minority_ratio(), true));
        let table = DemographicRatioTable::from_train(&ds);
        assert_eq!(table.ratio(0), 0.5);
        assert!(table.is_fallback(2));
        assert_eq!(table.ratio(2), ds.minority_ratio());
    }

    #[test]
    fn all_majority_item_has_zero_ratio() {
        let rows: Vec<(&[ItemId], u8)> = (0..7).map(|_| (&[0][..], 0)).chain([(&[1][..], 1)]).collect();
        let ds = toy_dataset(2, &rows);
        assert_eq!(demographic_ratio(&ds, 0), (0.0, false));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn count_weighted_ratio_mean_is_minority_share() {
        let rows: Vec<(&[ItemId], u8)> = vec![(&[0, 1, 2], 1), (&[0], 0), (&[1, 2], 0), (&[2], 0), (&[3], 1)];
        let ds = toy_dataset(5, &rows);
        let table = DemographicRatioTable::from_train(&ds);
        let weighted: f64 = (0..5).map(|i| table.ratio(i) * f64::from(table.count(i))).sum();
        let minority_interactions = ds.item_counts_in(Group::Minority).iter().sum::<u32>();
        assert!((weighted - f64::from(minority_interactions)).abs() < 1e-12);
    }

    fn table_with(ratios: &[f64]) -> DemographicRatioTable {
        DemographicRatioTable {
            ratios: ratios.to_vec(),
            counts: vec![10; ratios.len()],
            minority_ratio: 0.3,
        }
    }

    #[test]
    fn fair_recommendations_give_half() {
        let table = table_with(&[0.3, 0.3, 0.3]);
        let recs = RecommendationTable::new(2, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let labels = [Group::Minority, Group::Majority, Group::Majority];
        assert_eq!(demographic_ratio_auc(&table, &recs, &labels).unwrap(), 0.5);
    }

    #[test]
    fn polarized_recommendations_give_one() {
        let table = table_with(&[1.0, 1.0, 0.0, 0.0]);
        let recs = RecommendationTable::new(2, vec![vec![0, 1], vec![2, 3], vec![3, 2]]).unwrap();
        let labels = [Group::Minority, Group::Majority, Group::Majority];
        assert_eq!(demographic_ratio_auc(&table, &recs, &labels).unwrap(), 1.0);
    }

    #[test]
    fn six_user_instance_matches_enumeration() {
        let table = table_with(&[0.1, 0.2, 0.4, 0.5, 0.9, 0.3]);
        let lists = vec![
            vec![0, 1, 2], // median 0.2, minority
            vec![3, 4, 5], // 0.5, minority
            vec![2, 5, 0], // 0.3, majority
            vec![1, 2, 3], // 0.4, majority
            vec![0, 1, 5], // 0.2, majority
            vec![4, 3, 2], // 0.5, majority
        ];
        let recs = RecommendationTable::new(3, lists).unwrap();
        let labels = [
            Group::Minority,
            Group::Minority,
            Group::Majority,
            Group::Majority,
            Group::Majority,
            Group::Majority,
        ];
        // minority 0.2 vs {0.3, 0.4, 0.2, 0.5}: 0 + 0 + 0.5 + 0
        // minority 0.5 vs {0.3, 0.4, 0.2, 0.5}: 1 + 1 + 1 + 0.5
        let expected = (0.5 + 3.5) / 8.0;
        assert_eq!(demographic_ratio_auc(&table, &recs, &labels).unwrap(), expected);
    }

    #[test]
    fn item_ratio_examples() {
        // item 0 goes to 3 majority + 0 minority users; min count 1
        let recs = RecommendationTable::new(1, vec![vec![0], vec![0], vec![0]]).unwrap();
        let labels = [Group::Majority; 3];
        assert!((item_ratio(&recs, &labels, 0.3, 1).unwrap() - 0.3).abs() < 1e-15);

        // each item shown to exactly 1 minority of 2 users, ratio 0.5
        let recs = RecommendationTable::new(2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let labels = [Group::Minority, Group::Majority];
        assert_eq!(item_ratio(&recs, &labels, 0.5, 1).unwrap(), 0.0);

        assert!(matches!(
            item_ratio(&recs, &labels, 0.5, 5),
            Err(Error::NoQualifyingItems { min_count: 5 })
        ));
    }

    #[test]
    fn item_ratio_three_items_by_hand() {
        // users: m, m, M, M, M  (minority ratio 0.4)
        let lists = vec![vec![0, 1], vec![0, 2], vec![0, 1], vec![1, 2], vec![2, 3]];
        let labels = [Group::Minority, Group::Minority, Group::Majority, Group::Majority, Group::Majority];
        let recs = RecommendationTable::new(2, lists).unwrap();
        // item 0: 2/3, item 1: 1/3, item 2: 1/3; item 3 has one recommendation
        let expected = ((2.0 / 3.0 - 0.4f64).abs() + 2.0 * (1.0 / 3.0 - 0.4f64).abs()) / 3.0;
        let got = item_ratio(&recs, &labels, 0.4, 2).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }
}
