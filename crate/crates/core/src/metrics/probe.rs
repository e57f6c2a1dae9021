//! Logistic-regression probe for demographic information in representations.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::auc::{auc_from_scores, ScoredLabels};
use crate::data::Group;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus};
use crate::seed::SeedSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Candidate L2 strengths, chosen by validation log-loss.
    pub l2_grid: Vec<f64>,
    pub validation_fraction: f64,
    /// Independent validation slices whose test AUCs are averaged.
    pub n_seeds: usize,
    pub max_iter: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            validation_fraction: 0.2,
            n_seeds: 5,
            max_iter: 100,
        }
    }
}

/// Standardized L2-regularized logistic regression.
#[derive(Clone, Debug)]
pub struct LogisticModel {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array1<f64>,
    bias: f64,
}

/// Solves `a x = b` for symmetric positive definite `a`.
fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[[i, k]] * y[k]).sum();
        y[i] = (b[i] - s) / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (y[i] - s) / l[[i, i]];
    }
    Some(x)
}

impl LogisticModel {
    /// Newton's method with step halving on
    /// `mean log-loss + l2 / 2 * |w|^2` (bias unpenalized).
    pub fn fit(x: ArrayView2<'_, f64>, y: &[bool], l2: f64, max_iter: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if n != y.len() || n == 0 {
            return Err(Error::InvalidArgument(format!("{n} rows for {} labels", y.len())));
        }
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let mut scale = x.std_axis(Axis(0), 0.0);
        scale.mapv_inplace(|s| if s > 1e-12 { s } else { 1.0 });
        let z = (&x - &mean) / &scale;
        // design matrix with a trailing intercept column
        let mut design = Array2::<f64>::ones((n, d + 1));
        design.slice_mut(ndarray::s![.., ..d]).assign(&z);
        let targets: Array1<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();

        let objective = |theta: &Array1<f64>| -> f64 {
            let margins = design.dot(theta);
            let loss: f64 = margins
                .iter()
                .zip(&targets)
                .map(|(&m, &t)| softplus(m) - t * m)
                .sum::<f64>()
                / n as f64;
            loss + 0.5 * l2 * theta.slice(ndarray::s![..d]).mapv(|w| w * w).sum()
        };

        let mut theta = Array1::<f64>::zeros(d + 1);
        let mut value = objective(&theta);
        let mut grad_norm = f64::INFINITY;
        for _ in 0..max_iter {
            let p = design.dot(&theta).mapv(sigmoid);
            let residual = &p - &targets;
            let mut grad = design.t().dot(&residual) / n as f64;
            for j in 0..d {
                grad[j] += l2 * theta[j];
            }
            grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if grad_norm < 1e-9 {
                return Ok(Self::from_theta(mean, scale, theta));
            }
            let w = p.mapv(|q| (q * (1.0 - q)).max(1e-12));
            let weighted = &design * &w.view().insert_axis(Axis(1));
            let mut hessian = design.t().dot(&weighted) / n as f64;
            for j in 0..d {
                hessian[[j, j]] += l2;
            }
            hessian[[d, d]] += 1e-10;
            let step = cholesky_solve(&hessian, &grad).ok_or(Error::NonConvergence {
                iterations: 0,
                grad_norm,
            })?;
            let mut t = 1.0;
            loop {
                let candidate = &theta - &(&step * t);
                let next = objective(&candidate);
                if next <= value || t < 1e-10 {
                    theta = candidate;
                    value = next;
                    break;
                }
                t *= 0.5;
            }
        }
        if grad_norm < 1e-6 {
            return Ok(Self::from_theta(mean, scale, theta));
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            grad_norm,
        })
    }

    fn from_theta(mean: Array1<f64>, scale: Array1<f64>, theta: Array1<f64>) -> Self {
        let d = mean.len();
        LogisticModel {
            mean,
            scale,
            weights: theta.slice(ndarray::s![..d]).to_owned(),
            bias: theta[d],
        }
    }

    /// Decision values (logits).
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        ((&x - &self.mean) / &self.scale).dot(&self.weights) + self.bias
    }

    pub fn log_loss(&self, x: ArrayView2<'_, f64>, y: &[bool]) -> f64 {
        let margins = self.decision(x);
        margins
            .iter()
            .zip(y)
            .map(|(&m, &t)| softplus(m) - if t { m } else { 0.0 })
            .sum::<f64>()
            / y.len() as f64
    }
}

fn flags(labels: &[Group]) -> Vec<bool> {
    labels.iter().map(|g| g.is_minority()).collect()
}

fn check_classes(labels: &[Group]) -> Result<()> {
    let positives = labels.iter().filter(|g| g.is_minority()).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass {
            positives,
            negatives: labels.len() - positives,
        });
    }
    Ok(())
}

/// Stratified holdout of `fraction` of the rows (at least one per class).
pub(crate) fn stratified_holdout(labels: &[Group], fraction: f64, seed: SeedSpec) -> (Vec<usize>, Vec<usize>) {
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for group in [Group::Majority, Group::Minority] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == group).collect();
        rows.shuffle(&mut seed.derive_index("holdout", u64::from(group.label())).rng());
        let n = ((rows.len() as f64 * fraction).round() as usize).clamp(1.min(rows.len()), rows.len().saturating_sub(1));
        holdout.extend_from_slice(&rows[..n]);
        fit.extend_from_slice(&rows[n..]);
    }
    fit.sort_unstable();
    holdout.sort_unstable();
    (fit, holdout)
}

/// AUC of a logistic probe predicting the minority group from user
/// representations. The probe is trained on `train` rows with L2 strength
/// picked by log-loss on a validation slice, refit on all train rows, and
/// scored on `test` rows; the result is averaged over `n_seeds` slices.
pub fn representation_auc(
    train: ArrayView2<'_, f64>,
    train_labels: &[Group],
    test: ArrayView2<'_, f64>,
    test_labels: &[Group],
    config: &ProbeConfig,
    seed: SeedSpec,
) -> Result<f64> {
    check_classes(train_labels)?;
    check_classes(test_labels)?;
    if config.l2_grid.is_empty() || config.n_seeds == 0 {
        return Err(Error::Config("probe needs a nonempty l2 grid and at least one seed".into()));
    }
    let train_flags = flags(train_labels);
    let mut total = 0.0;
    for s in 0..config.n_seeds {
        let (fit_rows, val_rows) =
            stratified_holdout(train_labels, config.validation_fraction, seed.derive_index("probe", s as u64));
        let fit_x = train.select(Axis(0), &fit_rows);
        let val_x = train.select(Axis(0), &val_rows);
        let fit_y: Vec<bool> = fit_rows.iter().map(|&i| train_flags[i]).collect();
        let val_y: Vec<bool> = val_rows.iter().map(|&i| train_flags[i]).collect();

        let mut best = (f64::INFINITY, config.l2_grid[0]);
        for &l2 in &config.l2_grid {
            let model = LogisticModel::fit(fit_x.view(), &fit_y, l2, config.max_iter)?;
            let loss = model.log_loss(val_x.view(), &val_y);
            if loss < best.0 {
                best = (loss, l2);
            }
        }
        let model = LogisticModel::fit(train, &train_flags, best.1, config.max_iter)?;
        let scores = model.decision(test).to_vec();
        total += auc_from_scores(&ScoredLabels::new(scores, test_labels.to_vec())?)?;
    }
    Ok(total / config.n_seeds as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn alternating(n: usize) -> Vec<Group> {
        (0..n)
            .map(|i| if i % 3 == 0 { Group::Minority } else { Group::Majority })
            .collect()
    }

    #[test]
    fn constant_representations_give_half() {
        let labels = alternating(60);
        let x = Array2::from_elem((60, 4), 0.7);
        let auc = representation_auc(x.view(), &labels, x.view(), &labels, &ProbeConfig::default(), SeedSpec::new(1)).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn label_valued_representation_gives_one() {
        let labels = alternating(60);
        let x = Array2::from_shape_fn((60, 1), |(i, _)| f64::from(labels[i].label()));
        let auc = representation_auc(x.view(), &labels, x.view(), &labels, &ProbeConfig::default(), SeedSpec::new(1)).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let labels = vec![Group::Majority; 10];
        let x = Array2::zeros((10, 2));
        assert!(matches!(
            representation_auc(x.view(), &labels, x.view(), &labels, &ProbeConfig::default(), SeedSpec::new(0)),
            Err(Error::SingleClass { .. })
        ));
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = ndarray::arr2(&[[4.0, 2.0], [2.0, 3.0]]);
        let b = ndarray::arr1(&[2.0, 1.0]);
        let x = cholesky_solve(&a, &b).unwrap();
        let back = a.dot(&x);
        assert!((back[0] - 2.0).abs() < 1e-12 && (back[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_reaches_stationary_point() {
        let mut rng = SeedSpec::new(3).rng();
        let n = 300;
        let x = Array2::from_shape_fn((n, 3), |_| StandardNormal.sample(&mut rng));
        let y: Vec<bool> = (0..n).map(|i| x[[i, 0]] + 0.5 * x[[i, 1]] > 0.3).collect();
        let model = LogisticModel::fit(x.view(), &y, 0.01, 100).unwrap();
        assert!(model.weights[0] > model.weights[1] && model.weights[1] > 0.0);
    }
}
