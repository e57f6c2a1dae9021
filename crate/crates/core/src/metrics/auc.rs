use crate::data::Group;
use crate::error::{Error, Result};

/// Per-user scores with their group labels. `Minority` is the positive class.
#[derive(Clone, Debug, Default)]
pub struct ScoredLabels {
    pub scores: Vec<f64>,
    pub labels: Vec<Group>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<Group>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| s.is_nan()) {
            return Err(Error::InvalidArgument(format!("score {s} is not comparable")));
        }
        Ok(ScoredLabels { scores, labels })
    }
}

/// Mann-Whitney AUC: the fraction of (minority, majority) pairs in which the
/// minority user scores higher, ties counting one half. Not folded.
///
/// Counts are accumulated as integers so the result equals a pairwise double
/// loop exactly.
pub fn auc_from_scores(data: &ScoredLabels) -> Result<f64> {
    let positives = data.labels.iter().filter(|g| g.is_minority()).count();
    let negatives = data.labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    if data.scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_by(|&a, &b| data.scores[a].total_cmp(&data.scores[b]));

    // twice the number of won pairs plus the number of tied pairs
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let score = data.scores[order[start]];
        let mut end = start;
        let (mut pos, mut neg) = (0u128, 0u128);
        while end < order.len() && data.scores[order[end]] == score {
            if data.labels[order[end]].is_minority() {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok(doubled as f64 / (2 * positives as u128 * negatives as u128) as f64)
}

/// `max(a, 1 - a)`, for reports that want direction-free AUC.
pub fn fold_auc(auc: f64) -> f64 {
    auc.max(1.0 - auc)
}
