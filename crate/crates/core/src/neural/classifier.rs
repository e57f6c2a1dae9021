//! Demographic classifier over pooled recommendation lists.
//!
//! Every recommended item becomes its frozen embedding followed by its
//! demographic ratio. A list is the mean of its items, summed in ascending
//! item order so the result does not depend on list order. The pooled
//! vector is standardized and fed to a one-hidden-layer `tanh` network with
//! a logistic output.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTable;
use crate::binfmt::{BinReader, BinWriter};
use crate::data::{Group, RecommendationTable};
use crate::error::{Error, Result};
use crate::metrics::{auc_from_scores, stratified_holdout, DemographicRatioTable, ScoredLabels};
use crate::nn::{sigmoid, softplus, Adam};
use crate::seed::SeedSpec;

const MAGIC: &[u8; 8] = b"RPCLASSF";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierHyper {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper {
            hidden: 32,
            learning_rate: 5e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
        }
    }
}

/// Mean-pooled `[embedding, demographic ratio]` per list.
pub fn pooled_features(
    embeddings: &EmbeddingTable,
    polarization: &DemographicRatioTable,
    recs: &RecommendationTable,
) -> Result<Array2<f64>> {
    let (n_items, dim) = (embeddings.n_items(), embeddings.dim());
    if polarization.n_items() != n_items {
        return Err(Error::InvalidArgument(format!(
            "{n_items} embeddings but {} demographic ratios",
            polarization.n_items()
        )));
    }
    let mut out = Array2::zeros((recs.n_users(), dim + 1));
    for (mut row, list) in out.outer_iter_mut().zip(recs.lists()) {
        let mut items = list.clone();
        items.sort_unstable();
        for &item in &items {
            if item as usize >= n_items {
                return Err(Error::InvalidArgument(format!("item {item} outside the embedding table")));
            }
            let mut emb = row.slice_mut(ndarray::s![..dim]);
            emb += &embeddings.vectors.row(item as usize);
            row[dim] += polarization.ratio(item);
        }
        row /= items.len() as f64;
    }
    Ok(out)
}

/// Network weights; also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    /// hidden x features
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    /// Single entry.
    pub b2: Array1<f64>,
}

impl ClassifierParams {
    pub fn zeros(features: usize, hidden: usize) -> Self {
        ClassifierParams {
            w1: Array2::zeros((hidden, features)),
            b1: Array1::zeros(hidden),
            w2: Array1::zeros(hidden),
            b2: Array1::zeros(1),
        }
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    fn hidden(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (x.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh)
    }

    /// Logits for standardized inputs.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.hidden(x).dot(&self.w2) + self.b2[0]
    }
}

/// Mean logistic loss; `y` is true for minority rows.
pub fn classifier_loss(params: &ClassifierParams, x: ArrayView2<'_, f64>, y: &[bool]) -> f64 {
    let logits = params.logits(x);
    logits
        .iter()
        .zip(y)
        .map(|(&a, &t)| softplus(a) - if t { a } else { 0.0 })
        .sum::<f64>()
        / y.len() as f64
}

/// Gradient of [`classifier_loss`].
pub fn classifier_gradient(params: &ClassifierParams, x: ArrayView2<'_, f64>, y: &[bool]) -> ClassifierParams {
    let n = y.len() as f64;
    let hidden = params.hidden(x);
    let logits = hidden.dot(&params.w2) + params.b2[0];
    let d_logits: Array1<f64> = logits
        .iter()
        .zip(y)
        .map(|(&a, &t)| (sigmoid(a) - f64::from(u8::from(t))) / n)
        .collect();
    let d_hidden = d_logits.view().insert_axis(Axis(1)).dot(&params.w2.view().insert_axis(Axis(0)));
    let d_pre = d_hidden * hidden.mapv(|h| 1.0 - h * h);
    ClassifierParams {
        w1: d_pre.t().dot(&x),
        b1: d_pre.sum_axis(Axis(0)),
        w2: hidden.t().dot(&d_logits),
        b2: Array1::from_elem(1, d_logits.sum()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ListClassifier {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
    pub params: ClassifierParams,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub validation_loss: Vec<f64>,
}

fn minority_flags(labels: &[Group]) -> Vec<bool> {
    labels.iter().map(|g| g.is_minority()).collect()
}

/// Trains on pooled train-user lists with early stopping on a stratified
/// validation slice; the best validation weights are kept.
pub fn train_list_classifier(
    embeddings: &EmbeddingTable,
    polarization: &DemographicRatioTable,
    train_recs: &RecommendationTable,
    train_labels: &[Group],
    hyper: &ClassifierHyper,
    seed: SeedSpec,
) -> Result<ListClassifier> {
    if train_recs.n_users() != train_labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recommendation lists for {} labels",
            train_recs.n_users(),
            train_labels.len()
        )));
    }
    let positives = train_labels.iter().filter(|g| g.is_minority()).count();
    if positives < 2 || train_labels.len() - positives < 2 {
        return Err(Error::SingleClass {
            positives,
            negatives: train_labels.len() - positives,
        });
    }
    if hyper.hidden == 0 || hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::Config("classifier hidden size, batch size and learning rate must be positive".into()));
    }
    let raw = pooled_features(embeddings, polarization, train_recs)?;
    let mean = raw.mean_axis(Axis(0)).expect("nonempty");
    let mut scale = raw.std_axis(Axis(0), 0.0);
    scale.mapv_inplace(|s| if s > 1e-12 { s } else { 1.0 });
    let x = (&raw - &mean) / &scale;
    let y = minority_flags(train_labels);

    let (fit_rows, val_rows) = stratified_holdout(train_labels, hyper.validation_fraction, seed.derive("validation"));
    let val_x = x.select(Axis(0), &val_rows);
    let val_y: Vec<bool> = val_rows.iter().map(|&r| y[r]).collect();

    let features = x.ncols();
    let mut rng = seed.derive("init").rng();
    let mut params = ClassifierParams::zeros(features, hyper.hidden);
    let w1 = Normal::new(0.0, 1.0 / (features as f64).sqrt()).expect("valid");
    params.w1.mapv_inplace(|_| w1.sample(&mut rng));
    let w2 = Normal::new(0.0, 1.0 / (hyper.hidden as f64).sqrt()).expect("valid");
    params.w2.mapv_inplace(|_| w2.sample(&mut rng));

    let sizes: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(&sizes, hyper.learning_rate);
    let mut best = (classifier_loss(&params, val_x.view(), &val_y), params.clone(), 0);
    let mut validation_loss = Vec::new();
    let mut order = fit_rows.clone();
    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut seed.derive_index("epoch", epoch as u64).rng());
        for batch in order.chunks(hyper.batch_size) {
            let bx = x.select(Axis(0), batch);
            let by: Vec<bool> = batch.iter().map(|&r| y[r]).collect();
            let grad = classifier_gradient(&params, bx.view(), &by);
            adam.update(&mut params.blocks_mut(), &grad.blocks());
        }
        let loss = classifier_loss(&params, val_x.view(), &val_y);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        validation_loss.push(loss);
        if loss < best.0 {
            best = (loss, params.clone(), epoch);
        } else if epoch - best.2 >= hyper.patience {
            break;
        }
    }
    Ok(ListClassifier {
        mean,
        scale,
        params: best.1,
        best_epoch: best.2,
        validation_loss,
    })
}

impl ListClassifier {
    /// Classifier logits for each list; higher means more likely minority.
    pub fn scores(
        &self,
        embeddings: &EmbeddingTable,
        polarization: &DemographicRatioTable,
        recs: &RecommendationTable,
    ) -> Result<Vec<f64>> {
        let raw = pooled_features(embeddings, polarization, recs)?;
        if raw.ncols() != self.mean.len() {
            return Err(Error::InvalidArgument(format!(
                "classifier expects {} features, lists give {}",
                self.mean.len(),
                raw.ncols()
            )));
        }
        let x = (&raw - &self.mean) / &self.scale;
        Ok(self.params.logits(x.view()).to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.writer().into_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.writer().save(path)
    }

    fn writer(&self) -> BinWriter {
        let mut w = BinWriter::new(MAGIC, VERSION);
        w.u64(self.mean.len() as u64);
        w.u64(self.params.b1.len() as u64);
        w.u64(self.best_epoch as u64);
        w.f64s(self.mean.as_slice().expect("standard layout"));
        w.f64s(self.scale.as_slice().expect("standard layout"));
        for block in self.params.blocks() {
            w.f64s(block);
        }
        w.f64s(&self.validation_loss);
        w
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        Self::read(BinReader::from_bytes(bytes, MAGIC, VERSION)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BinReader::open(path, MAGIC, VERSION)?)
    }

    fn read(mut r: BinReader) -> Result<Self> {
        let features = r.u64()? as usize;
        let hidden = r.u64()? as usize;
        let best_epoch = r.u64()? as usize;
        let mean = Array1::from(r.f64s(features)?);
        let scale = Array1::from(r.f64s(features)?);
        let mut params = ClassifierParams::zeros(features, hidden);
        for block in params.blocks_mut() {
            let values = r.f64s(block.len())?;
            block.copy_from_slice(&values);
        }
        let validation_loss = r.f64s_any()?;
        r.finish()?;
        Ok(ListClassifier {
            mean,
            scale,
            params,
            best_epoch,
            validation_loss,
        })
    }
}

/// Unfolded test AUC of each classifier, averaged.
pub fn neural_auc(
    classifiers: &[ListClassifier],
    embeddings: &EmbeddingTable,
    polarization: &DemographicRatioTable,
    test_recs: &RecommendationTable,
    test_labels: &[Group],
) -> Result<f64> {
    if classifiers.is_empty() {
        return Err(Error::InvalidArgument("no classifiers to evaluate".into()));
    }
    let mut total = 0.0;
    for classifier in classifiers {
        let scores = classifier.scores(embeddings, polarization, test_recs)?;
        total += auc_from_scores(&ScoredLabels::new(scores, test_labels.to_vec())?)?;
    }
    Ok(total / classifiers.len() as f64)
}
