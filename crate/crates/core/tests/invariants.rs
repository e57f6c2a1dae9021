use std::collections::HashSet;

use proptest::prelude::*;
use recparity::io::{read_dataset_files, write_dataset, DatasetFiles, LabelRule};
use recparity::metrics::{
    demographic_ratio_auc, fold_auc, group_kendall_tau, item_ratio, DemographicRatioTable,
};
use recparity::recommenders::{recommend_baseline, Baseline};
use recparity::{split_by_user, Error, Group, InteractionDataset, ItemId, Provenance, SeedSpec};

fn dataset() -> impl Strategy<Value = InteractionDataset> {
    (30usize..60, 8usize..40).prop_flat_map(|(n_items, n_users)| {
        let history = prop::collection::btree_set(0..n_items as ItemId, 1..10)
            .prop_map(|items| items.into_iter().collect::<Vec<_>>());
        (
            Just(n_items),
            prop::collection::vec(history, n_users),
            prop::collection::vec(any::<bool>(), n_users),
        )
            .prop_map(|(n_items, histories, minority)| {
                let mut groups: Vec<Group> =
                    minority.iter().map(|&m| if m { Group::Minority } else { Group::Majority }).collect();
                // at least two users per group so both split sides get one
                groups[..2].fill(Group::Minority);
                groups[2..4].fill(Group::Majority);
                InteractionDataset::new(n_items, histories, groups, Provenance::Synthetic).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_users(d in dataset(), ratio in 0.1f64..0.5, seed in any::<u64>()) {
        let s = split_by_user(&d, ratio, SeedSpec::new(seed)).unwrap();
        let mut all: Vec<usize> = s.train_users.iter().chain(&s.test_users).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.n_users()).collect::<Vec<_>>());
        for (side, users) in [(&s.train, &s.train_users), (&s.test, &s.test_users)] {
            prop_assert_eq!(side.n_users(), users.len());
            prop_assert!(side.group_size(Group::Minority) >= 1);
            prop_assert!(side.group_size(Group::Majority) >= 1);
            for (row, &u) in users.iter().enumerate() {
                prop_assert_eq!(side.history(row), d.history(u));
                prop_assert_eq!(side.group(row), d.group(u));
            }
        }
        let again = split_by_user(&d, ratio, SeedSpec::new(seed)).unwrap();
        prop_assert_eq!(again.test_users, s.test_users);
    }

    #[test]
    fn baseline_lists_are_unseen_and_distinct(d in dataset(), k in 1usize..10, seed in any::<u64>()) {
        for baseline in Baseline::ALL {
            match recommend_baseline(baseline, &d, &d, k, SeedSpec::new(seed)) {
                Ok(recs) => {
                    prop_assert_eq!(recs.n_users(), d.n_users());
                    for u in 0..d.n_users() {
                        let list = recs.list(u);
                        prop_assert_eq!(list.len(), k);
                        let seen: HashSet<_> = d.history(u).iter().collect();
                        prop_assert!(list.iter().all(|i| !seen.contains(i)));
                        prop_assert_eq!(list.iter().collect::<HashSet<_>>().len(), k);
                    }
                }
                Err(Error::InsufficientItems { .. }) => prop_assert_eq!(baseline, Baseline::MaxDivision),
                Err(e) => prop_assert!(false, "{baseline}: {e}"),
            }
        }
    }

    #[test]
    fn metric_ranges(d in dataset(), k in 1usize..10, seed in any::<u64>()) {
        let table = DemographicRatioTable::from_train(&d);
        prop_assert!(table.ratios().iter().all(|r| (0.0..=1.0).contains(r)));
        for baseline in [Baseline::Pop, Baseline::Rand, Baseline::DemPop] {
            let recs = recommend_baseline(baseline, &d, &d, k, SeedSpec::new(seed)).unwrap();
            let auc = demographic_ratio_auc(&table, &recs, d.groups()).unwrap();
            prop_assert!((0.0..=1.0).contains(&auc));
            prop_assert!(fold_auc(auc) >= 0.5);
            let tau = group_kendall_tau(&recs, d.groups(), k).unwrap();
            prop_assert!((-1.0..=1.0).contains(&tau));
            if let Ok(r) = item_ratio(&recs, d.groups(), d.minority_ratio(), 1) {
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn tsv_round_trip(d in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let files = DatasetFiles::in_dir(dir.path());
        write_dataset(&d, &files).unwrap();
        let back = read_dataset_files(&DatasetFiles::existing_in_dir(dir.path()), &LabelRule::Binary).unwrap();
        prop_assert_eq!(back.dataset.n_items(), d.n_items());
        prop_assert_eq!(back.dataset.histories(), d.histories());
        prop_assert_eq!(back.dataset.groups(), d.groups());
    }
}
