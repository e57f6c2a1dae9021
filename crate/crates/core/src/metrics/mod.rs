//! Output- and representation-level demographic leakage measures.

mod auc;
mod kendall;
mod probe;
mod ratio;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use auc::{auc_from_scores, fold_auc, ScoredLabels};
pub use kendall::{aggregate_group_ranking, group_kendall_tau, kendall_tau_extended, GroupAggregateRanking};
pub use probe::{representation_auc, LogisticModel, ProbeConfig};
pub(crate) use probe::stratified_holdout;
pub use ratio::{
    demographic_ratio, demographic_ratio_auc, item_ratio, median, median_ratio_scores,
    DemographicRatioTable,
};
pub use report::{read_report, write_report, write_report_to, MetricReport, MetricValue, REPORT_HEADER};

use crate::error::Error;

/// Minimum number of users an item must be recommended to before it counts
/// in [`item_ratio`].
pub const DEFAULT_MIN_REC_COUNT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DemographicRatioAuc,
    NeuralAuc,
    ItemRatio,
    KendallTau,
    RepresentationAuc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::DemographicRatioAuc,
        Metric::NeuralAuc,
        Metric::ItemRatio,
        Metric::KendallTau,
        Metric::RepresentationAuc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DemographicRatioAuc => "demographic_ratio_auc",
            Metric::NeuralAuc => "neural_auc",
            Metric::ItemRatio => "item_ratio",
            Metric::KendallTau => "kendall_tau",
            Metric::RepresentationAuc => "representation_auc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}
