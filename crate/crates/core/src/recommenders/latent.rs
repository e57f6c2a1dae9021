//! One-hidden-layer denoising autoencoder recommender with an optional
//! gradient-reversal demographic adversary on the hidden layer.
//!
//! Each user's input is the sum of the encoder rows of the items kept after
//! masking, scaled by `1/sqrt(kept)`. The hidden layer is `tanh`, the decoder
//! produces one score per item and reconstruction is the multinomial
//! negative log-likelihood of the masked-out items. The adversary is a
//! logistic regression on the hidden vector. Its encoder gradient is negated
//! and rescaled to `fairness_weight` times the norm of the reconstruction
//! gradient, so the weight reads as the relative strength of the two pulls.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::binfmt::{BinReader, BinWriter};
use crate::data::{Group, InteractionDataset, ItemId, RecommendationTable};
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus, Adam};
use crate::seed::SeedSpec;

const MAGIC: &[u8; 8] = b"RPLATENT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentHyper {
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub adversary_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Probability that an interacted item is hidden from the input.
    pub mask_rate: f64,
    /// Adversary updates per mini-batch, on the batch's freshly encoded
    /// hidden vectors.
    pub adversary_steps: usize,
    /// Train the adversary at all. With `false` no adversary computation
    /// happens; with `true` and a zero fairness weight it is trained but
    /// never touches the encoder.
    pub adversary: bool,
}

impl Default for LatentHyper {
    fn default() -> Self {
        LatentHyper {
            latent_dim: 64,
            learning_rate: 2e-3,
            adversary_learning_rate: 5e-2,
            epochs: 30,
            batch_size: 32,
            mask_rate: 0.5,
            adversary_steps: 10,
            adversary: true,
        }
    }
}

impl LatentHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("latent model: {m}")));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.adversary_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.mask_rate) {
            return bad("mask_rate must be in [0, 1)");
        }
        Ok(())
    }
}

/// Trainable weights. Also used to hold gradients of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentParams {
    /// items x d
    pub encoder: Array2<f64>,
    pub encoder_bias: Array1<f64>,
    /// items x d
    pub decoder: Array2<f64>,
    pub decoder_bias: Array1<f64>,
    pub adversary: Array1<f64>,
    /// Single entry.
    pub adversary_bias: Array1<f64>,
}

impl LatentParams {
    pub fn zeros(n_items: usize, d: usize) -> Self {
        LatentParams {
            encoder: Array2::zeros((n_items, d)),
            encoder_bias: Array1::zeros(d),
            decoder: Array2::zeros((n_items, d)),
            decoder_bias: Array1::zeros(n_items),
            adversary: Array1::zeros(d),
            adversary_bias: Array1::zeros(1),
        }
    }

    pub fn n_items(&self) -> usize {
        self.encoder.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.ncols()
    }

    /// All parameter blocks as flat slices, in a fixed order.
    pub fn blocks(&self) -> [&[f64]; 6] {
        [
            self.encoder.as_slice().expect("standard layout"),
            self.encoder_bias.as_slice().expect("standard layout"),
            self.decoder.as_slice().expect("standard layout"),
            self.decoder_bias.as_slice().expect("standard layout"),
            self.adversary.as_slice().expect("standard layout"),
            self.adversary_bias.as_slice().expect("standard layout"),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.encoder.as_slice_mut().expect("standard layout"),
            self.encoder_bias.as_slice_mut().expect("standard layout"),
            self.decoder.as_slice_mut().expect("standard layout"),
            self.decoder_bias.as_slice_mut().expect("standard layout"),
            self.adversary.as_slice_mut().expect("standard layout"),
            self.adversary_bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// One user's masked training example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingRow {
    /// Items visible to the encoder.
    pub input: Vec<ItemId>,
    /// Items to reconstruct.
    pub target: Vec<ItemId>,
    pub group: Group,
}

/// Mean reconstruction and adversary losses of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub reconstruction: f64,
    pub adversary: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentModel {
    pub hyper: LatentHyper,
    pub fairness_weight: f64,
    pub seed: SeedSpec,
    pub params: LatentParams,
    pub history: Vec<EpochLoss>,
}

/// Per-user latent vectors, row `r` belonging to `users[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMatrix {
    pub users: Vec<usize>,
    pub values: Array2<f64>,
}

fn input_scale(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / (n as f64).sqrt()
    }
}

/// Hidden activations for a batch of input item sets.
fn encode<'a>(params: &LatentParams, inputs: impl ExactSizeIterator<Item = &'a [ItemId]>) -> Array2<f64> {
    let d = params.latent_dim();
    let mut hidden = Array2::zeros((inputs.len(), d));
    for (mut row, items) in hidden.outer_iter_mut().zip(inputs) {
        for &item in items {
            row += &params.encoder.row(item as usize);
        }
        row *= input_scale(items.len());
        row += &params.encoder_bias;
        row.mapv_inplace(f64::tanh);
    }
    hidden
}

fn decoder_scores(params: &LatentParams, hidden: &Array2<f64>) -> Array2<f64> {
    hidden.dot(&params.decoder.t()) + &params.decoder_bias
}

/// Row-wise softmax in place, returning each row's log normalizer.
fn softmax_rows(scores: &mut Array2<f64>) -> Vec<f64> {
    scores
        .outer_iter_mut()
        .map(|mut row| {
            let max = row.fold(f64::NEG_INFINITY, |m, &s| m.max(s));
            row.mapv_inplace(|s| (s - max).exp());
            let total = row.sum();
            row /= total;
            max + total.ln()
        })
        .collect()
}

fn adversary_logits(params: &LatentParams, hidden: &Array2<f64>) -> Array1<f64> {
    hidden.dot(&params.adversary) + params.adversary_bias[0]
}

fn label(group: Group) -> f64 {
    f64::from(u8::from(group.is_minority()))
}

/// Batch-mean reconstruction and adversary losses.
pub fn batch_losses(params: &LatentParams, rows: &[TrainingRow]) -> (f64, f64) {
    let hidden = encode(params, rows.iter().map(|r| r.input.as_slice()));
    let scores = decoder_scores(params, &hidden);
    let b = rows.len() as f64;
    let mut reconstruction = 0.0;
    for (row, s) in rows.iter().zip(scores.outer_iter()) {
        if row.target.is_empty() {
            continue;
        }
        let max = s.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_norm = max + s.mapv(|v| (v - max).exp()).sum().ln();
        let picked: f64 = row.target.iter().map(|&t| s[t as usize]).sum();
        reconstruction += row.target.len() as f64 * log_norm - picked;
    }
    let logits = adversary_logits(params, &hidden);
    let adversary: f64 = rows
        .iter()
        .zip(&logits)
        .map(|(row, &a)| softplus(a) - label(row.group) * a)
        .sum();
    (reconstruction / b, adversary / b)
}

/// Accumulates `d loss / d hidden` back into the encoder gradient.
fn backprop_encoder(
    grad: &mut LatentParams,
    rows: &[TrainingRow],
    hidden: &Array2<f64>,
    d_hidden: &Array2<f64>,
) {
    for ((row, h), dh) in rows.iter().zip(hidden.outer_iter()).zip(d_hidden.outer_iter()) {
        let dz: Array1<f64> = &dh * &h.mapv(|v| 1.0 - v * v);
        grad.encoder_bias += &dz;
        let scale = input_scale(row.input.len());
        for &item in &row.input {
            grad.encoder.row_mut(item as usize).scaled_add(scale, &dz);
        }
    }
}

/// Gradients of the reconstruction loss and of the adversary loss, each with
/// respect to every parameter (no reversal applied).
pub fn batch_gradients(params: &LatentParams, rows: &[TrainingRow], with_adversary: bool) -> (LatentParams, Option<LatentParams>) {
    let (n_items, d) = (params.n_items(), params.latent_dim());
    let b = rows.len() as f64;
    let hidden = encode(params, rows.iter().map(|r| r.input.as_slice()));

    let mut d_scores = decoder_scores(params, &hidden);
    softmax_rows(&mut d_scores);
    for (row, mut ds) in rows.iter().zip(d_scores.outer_iter_mut()) {
        if row.target.is_empty() {
            ds.fill(0.0);
            continue;
        }
        ds *= row.target.len() as f64;
        for &t in &row.target {
            ds[t as usize] -= 1.0;
        }
        ds /= b;
    }
    let mut rec = LatentParams::zeros(n_items, d);
    rec.decoder = d_scores.t().dot(&hidden);
    rec.decoder_bias = d_scores.sum_axis(Axis(0));
    let d_hidden = d_scores.dot(&params.decoder);
    backprop_encoder(&mut rec, rows, &hidden, &d_hidden);

    let adv = with_adversary.then(|| {
        let logits = adversary_logits(params, &hidden);
        let d_logits: Array1<f64> = rows
            .iter()
            .zip(&logits)
            .map(|(row, &a)| (sigmoid(a) - label(row.group)) / b)
            .collect();
        let mut adv = LatentParams::zeros(n_items, d);
        adv.adversary = hidden.t().dot(&d_logits);
        adv.adversary_bias[0] = d_logits.sum();
        let d_hidden = d_logits
            .view()
            .insert_axis(Axis(1))
            .dot(&params.adversary.view().insert_axis(Axis(0)));
        backprop_encoder(&mut adv, rows, &hidden, &d_hidden);
        adv
    });
    (rec, adv)
}

/// Gradient of the adversary loss with respect to the adversary weights and
/// bias, for fixed hidden vectors.
fn adversary_gradient(params: &LatentParams, rows: &[TrainingRow], hidden: &Array2<f64>) -> (Array1<f64>, f64) {
    let b = rows.len() as f64;
    let logits = adversary_logits(params, hidden);
    let d_logits: Array1<f64> = rows
        .iter()
        .zip(&logits)
        .map(|(row, &a)| (sigmoid(a) - label(row.group)) / b)
        .collect();
    (hidden.t().dot(&d_logits), d_logits.sum())
}

fn initial_params(train: &InteractionDataset, d: usize, seed: SeedSpec) -> LatentParams {
    let n_items = train.n_items();
    let mut params = LatentParams::zeros(n_items, d);
    let mut rng = seed.derive("init").rng();
    let encoder = Normal::new(0.0, 0.5).expect("valid");
    params.encoder.mapv_inplace(|_| encoder.sample(&mut rng));
    let decoder = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid");
    params.decoder.mapv_inplace(|_| decoder.sample(&mut rng));
    // start from the log popularity so early epochs are not spent on it
    let counts = train.item_counts();
    let total = counts.iter().map(|&c| f64::from(c) + 1.0).sum::<f64>();
    for (b, &c) in params.decoder_bias.iter_mut().zip(&counts) {
        *b = ((f64::from(c) + 1.0) / total).ln();
    }
    params
}

fn mask_row(history: &[ItemId], group: Group, mask_rate: f64, rng: &mut impl Rng) -> TrainingRow {
    let mut row = TrainingRow {
        input: Vec::with_capacity(history.len()),
        target: Vec::new(),
        group,
    };
    for &item in history {
        if rng.random::<f64>() < mask_rate {
            row.target.push(item);
        } else {
            row.input.push(item);
        }
    }
    row
}

/// Trains the autoencoder and, when enabled, the adversary.
pub fn train_latent(
    train: &InteractionDataset,
    hyper: &LatentHyper,
    fairness_weight: f64,
    seed: SeedSpec,
) -> Result<LatentModel> {
    hyper.validate()?;
    if !(fairness_weight >= 0.0 && fairness_weight.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fairness weight {fairness_weight} must be finite and non-negative"
        )));
    }
    if train.n_users() == 0 || train.n_interactions() == 0 {
        return Err(Error::NoInteractions);
    }
    let d = hyper.latent_dim;
    let mut params = initial_params(train, d, seed);
    let sizes: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
    let mut model_opt = Adam::new(&sizes[..4], hyper.learning_rate);
    let mut adv_opt = Adam::new(&sizes[4..], hyper.adversary_learning_rate);

    let mut history = Vec::with_capacity(hyper.epochs);
    let mut order: Vec<usize> = (0..train.n_users()).collect();
    for epoch in 0..hyper.epochs {
        let mut rng = seed.derive_index("epoch", epoch as u64).rng();
        order.shuffle(&mut rng);
        let (mut rec_total, mut adv_total) = (0.0, 0.0);
        for batch in order.chunks(hyper.batch_size) {
            let rows: Vec<TrainingRow> = batch
                .iter()
                .map(|&u| mask_row(train.history(u), train.group(u), hyper.mask_rate, &mut rng))
                .collect();
            let (rec_loss, adv_loss) = batch_losses(&params, &rows);
            if !rec_loss.is_finite() || !adv_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: if rec_loss.is_finite() { adv_loss } else { rec_loss },
                });
            }
            rec_total += rec_loss * rows.len() as f64;
            adv_total += adv_loss * rows.len() as f64;

            let (mut grad, adv) = batch_gradients(&params, &rows, hyper.adversary && fairness_weight > 0.0);
            if let Some(adv) = adv {
                // gradient reversal into the encoder only, scaled relative to
                // the reconstruction gradient
                let norm = |g: &LatentParams| (g.encoder.mapv(|v| v * v).sum() + g.encoder_bias.mapv(|v| v * v).sum()).sqrt();
                let (rec_norm, adv_norm) = (norm(&grad), norm(&adv));
                if adv_norm > 0.0 {
                    let scale = fairness_weight * rec_norm / adv_norm;
                    grad.encoder.scaled_add(-scale, &adv.encoder);
                    grad.encoder_bias.scaled_add(-scale, &adv.encoder_bias);
                }
            }
            {
                let [enc, enc_b, dec, dec_b, _, _] = params.blocks_mut();
                let g = grad.blocks();
                model_opt.update(&mut [enc, enc_b, dec, dec_b], &g[..4]);
            }
            if hyper.adversary {
                let hidden = encode(&params, rows.iter().map(|r| r.input.as_slice()));
                for _ in 0..hyper.adversary_steps {
                    let (gw, gb) = adversary_gradient(&params, &rows, &hidden);
                    let [.., w, b] = params.blocks_mut();
                    adv_opt.update(&mut [w, b], &[gw.as_slice().expect("contiguous"), &[gb]]);
                }
            }
        }
        let n = train.n_users() as f64;
        history.push(EpochLoss {
            reconstruction: rec_total / n,
            adversary: adv_total / n,
        });
    }
    Ok(LatentModel {
        hyper: hyper.clone(),
        fairness_weight,
        seed,
        params,
        history,
    })
}

/// Items sorted by descending score, ties by ascending index, skipping the
/// (sorted) history; the first `k` are returned.
pub fn top_k_unseen(scores: ArrayView1<'_, f64>, history: &[ItemId], k: usize) -> Result<Vec<ItemId>> {
    let mut candidates: Vec<ItemId> = (0..scores.len() as ItemId)
        .filter(|i| history.binary_search(i).is_err())
        .collect();
    if candidates.len() < k {
        return Err(Error::InsufficientItems {
            needed: k,
            available: candidates.len(),
        });
    }
    let cmp = |a: &ItemId, b: &ItemId| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    if k > 0 && k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_by(cmp);
    candidates.truncate(k);
    Ok(candidates)
}

impl LatentModel {
    pub fn n_items(&self) -> usize {
        self.params.n_items()
    }

    /// Deterministic hidden vector of a full history.
    pub fn encode(&self, history: &[ItemId]) -> Array1<f64> {
        encode(&self.params, std::iter::once(history)).row(0).to_owned()
    }

    /// Decoder scores for every item given a history.
    pub fn scores(&self, history: &[ItemId]) -> Array1<f64> {
        let hidden = encode(&self.params, std::iter::once(history));
        decoder_scores(&self.params, &hidden).row(0).to_owned()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_writer().save(path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_writer().into_bytes()
    }

    fn to_writer(&self) -> BinWriter {
        let h = &self.hyper;
        let mut w = BinWriter::new(MAGIC, VERSION);
        w.u64(self.params.n_items() as u64);
        w.u64(h.latent_dim as u64);
        w.f64(h.learning_rate);
        w.f64(h.adversary_learning_rate);
        w.u64(h.epochs as u64);
        w.u64(h.batch_size as u64);
        w.f64(h.mask_rate);
        w.u64(h.adversary_steps as u64);
        w.u8(u8::from(h.adversary));
        w.f64(self.fairness_weight);
        w.u64(self.seed.as_u64());
        for block in self.params.blocks() {
            w.f64s(block);
        }
        w.u64(self.history.len() as u64);
        for e in &self.history {
            w.f64(e.reconstruction);
            w.f64(e.adversary);
        }
        w
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BinReader::open(path, MAGIC, VERSION)?)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        Self::read(BinReader::from_bytes(bytes, MAGIC, VERSION)?)
    }

    fn read(mut r: BinReader) -> Result<Self> {
        let n_items = r.u64()? as usize;
        let hyper = LatentHyper {
            latent_dim: r.u64()? as usize,
            learning_rate: r.f64()?,
            adversary_learning_rate: r.f64()?,
            epochs: r.u64()? as usize,
            batch_size: r.u64()? as usize,
            mask_rate: r.f64()?,
            adversary_steps: r.u64()? as usize,
            adversary: r.u8()? != 0,
        };
        let fairness_weight = r.f64()?;
        let seed = SeedSpec::from_u64(r.u64()?);
        let mut params = LatentParams::zeros(n_items, hyper.latent_dim);
        for block in params.blocks_mut() {
            let values = r.f64s(block.len())?;
            block.copy_from_slice(&values);
        }
        let n_epochs = r.u64()? as usize;
        let history = (0..n_epochs)
            .map(|_| {
                Ok(EpochLoss {
                    reconstruction: r.f64()?,
                    adversary: r.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(LatentModel {
            hyper,
            fairness_weight,
            seed,
            params,
            history,
        })
    }
}

/// Hidden vectors of the given users' full histories.
pub fn latent_representations(
    model: &LatentModel,
    dataset: &InteractionDataset,
    users: &[usize],
) -> Result<RepresentationMatrix> {
    if let Some(&bad) = users.iter().find(|&&u| u >= dataset.n_users()) {
        return Err(Error::InvalidArgument(format!("user index {bad} out of range")));
    }
    if dataset.n_items() != model.n_items() {
        return Err(Error::InvalidArgument(format!(
            "model has {} items, dataset {}",
            model.n_items(),
            dataset.n_items()
        )));
    }
    let values = encode(&model.params, users.iter().map(|&u| dataset.history(u)));
    Ok(RepresentationMatrix {
        users: users.to_vec(),
        values,
    })
}

/// Top-k unseen items by decoder score.
pub fn latent_recommend(model: &LatentModel, history: &[ItemId], k: usize) -> Result<Vec<ItemId>> {
    top_k_unseen(model.scores(history).view(), history, k)
}

/// Recommendations for every user of a dataset, encoded in chunks.
pub fn latent_recommend_all(model: &LatentModel, dataset: &InteractionDataset, k: usize) -> Result<RecommendationTable> {
    if dataset.n_items() != model.n_items() {
        return Err(Error::InvalidArgument(format!(
            "model has {} items, dataset {}",
            model.n_items(),
            dataset.n_items()
        )));
    }
    let mut lists = Vec::with_capacity(dataset.n_users());
    let users: Vec<usize> = (0..dataset.n_users()).collect();
    for chunk in users.chunks(256) {
        let hidden = encode(&model.params, chunk.iter().map(|&u| dataset.history(u)));
        let scores = decoder_scores(&model.params, &hidden);
        for (&u, row) in chunk.iter().zip(scores.outer_iter()) {
            lists.push(top_k_unseen(row, dataset.history(u), k)?);
        }
    }
    RecommendationTable::new(k, lists)
}
