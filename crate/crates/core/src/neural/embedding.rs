//! Item embeddings pretrained on co-liked item pairs with a skip-gram
//! negative-sampling objective.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::binfmt::{BinReader, BinWriter};
use crate::data::{InteractionDataset, ItemId};
use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::seed::SeedSpec;

const MAGIC: &[u8; 8] = b"RPEMBED\0";
const VERSION: u32 = 1;

/// (center, neighbor) pairs of items liked by the same user.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SkipGramPairs {
    pub n_items: usize,
    pub pairs: Vec<(ItemId, ItemId)>,
}

/// For every (user, item) draws up to `max_neighbors` distinct other items
/// of the same user, uniformly without replacement.
pub fn sample_skipgram_pairs(train: &InteractionDataset, max_neighbors: usize, seed: SeedSpec) -> SkipGramPairs {
    let mut pairs = Vec::new();
    for (user, history) in train.histories().iter().enumerate() {
        if history.len() < 2 {
            continue;
        }
        let mut rng = seed.derive_index("pairs", user as u64).rng();
        let others = history.len() - 1;
        let take = max_neighbors.min(others);
        for (pos, &center) in history.iter().enumerate() {
            for j in index::sample(&mut rng, others, take) {
                // skip over the center's own position
                let neighbor = history[if j < pos { j } else { j + 1 }];
                pairs.push((center, neighbor));
            }
        }
    }
    SkipGramPairs {
        n_items: train.n_items(),
        pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingHyper {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial SGD step, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
}

impl Default for EmbeddingHyper {
    fn default() -> Self {
        EmbeddingHyper {
            dim: 32,
            negatives: 10,
            epochs: 5,
            learning_rate: 0.025,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    /// items x dim input embeddings
    pub vectors: Array2<f64>,
    /// False for items that never occurred in a pair; they keep their
    /// initial values.
    pub paired: Vec<bool>,
    pub epochs: usize,
    /// Mean per-pair objective of each epoch.
    pub loss_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Skip-gram with negative sampling. Input vectors start uniform in
/// `±0.5/dim`, output vectors at zero; negatives follow the unigram^0.75
/// distribution of pair occurrences.
pub fn train_item_embeddings(pairs: &SkipGramPairs, hyper: &EmbeddingHyper, seed: SeedSpec) -> Result<EmbeddingTable> {
    if pairs.pairs.is_empty() {
        return Err(Error::InvalidArgument("no skip-gram pairs to train on".into()));
    }
    if hyper.dim == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::Config("embedding dim and learning rate must be positive".into()));
    }
    let (n, dim) = (pairs.n_items, hyper.dim);
    let mut init = seed.derive("init").rng();
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..n * dim).map(|_| init.random_range(-bound..bound)).collect();
    let mut output = vec![0.0; n * dim];

    let mut counts = vec![0u64; n];
    for &(c, o) in &pairs.pairs {
        counts[c as usize] += 1;
        counts[o as usize] += 1;
    }
    let paired: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedAliasIndex::new(weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let total_steps = (hyper.epochs * pairs.pairs.len()).max(1) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..pairs.pairs.len()).collect();
    let mut loss_history = Vec::with_capacity(hyper.epochs);
    let mut grad = vec![0.0; dim];
    for epoch in 0..hyper.epochs {
        let mut rng = seed.derive_index("epoch", epoch as u64).rng();
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &p in &order {
            let lr = hyper.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
            step += 1;
            let (center, context) = pairs.pairs[p];
            let c = center as usize * dim;
            grad.fill(0.0);
            for s in 0..=hyper.negatives {
                let (target, label) = if s == 0 {
                    (context as usize, 1.0)
                } else {
                    let t = noise.sample(&mut rng);
                    if t == context as usize {
                        continue;
                    }
                    (t, 0.0)
                };
                let t = target * dim;
                let score = dot(&input[c..c + dim], &output[t..t + dim]);
                let prob = sigmoid(score);
                loss -= if label == 1.0 { prob.ln() } else { (1.0 - prob).ln() };
                let g = lr * (label - prob);
                for j in 0..dim {
                    grad[j] += g * output[t + j];
                    output[t + j] += g * input[c + j];
                }
            }
            for j in 0..dim {
                input[c + j] += grad[j];
            }
        }
        let mean = loss / pairs.pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        loss_history.push(mean);
    }
    Ok(EmbeddingTable {
        vectors: Array2::from_shape_vec((n, dim), input).expect("shape matches"),
        paired,
        epochs: hyper.epochs,
        loss_history,
    })
}

/// Cosine similarity of two vectors; 0 when either is zero.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let norm = (a.dot(&a) * b.dot(&b)).sqrt();
    if norm == 0.0 {
        0.0
    } else {
        a.dot(&b) / norm
    }
}

impl EmbeddingTable {
    pub fn n_items(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.writer().into_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.writer().save(path)
    }

    fn writer(&self) -> BinWriter {
        let mut w = BinWriter::new(MAGIC, VERSION);
        w.u64(self.dim() as u64);
        w.u64(self.n_items() as u64);
        w.u64(self.epochs as u64);
        w.f64s(self.vectors.as_slice().expect("standard layout"));
        for &p in &self.paired {
            w.u8(u8::from(p));
        }
        w.f64s(&self.loss_history);
        w
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        Self::read(BinReader::from_bytes(bytes, MAGIC, VERSION)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BinReader::open(path, MAGIC, VERSION)?)
    }

    fn read(mut r: BinReader) -> Result<Self> {
        let dim = r.u64()? as usize;
        let n = r.u64()? as usize;
        let epochs = r.u64()? as usize;
        let vectors = Array2::from_shape_vec((n, dim), r.f64s(n * dim)?).expect("shape matches");
        let paired = (0..n).map(|_| Ok(r.u8()? != 0)).collect::<Result<Vec<_>>>()?;
        let loss_history = r.f64s(epochs)?;
        r.finish()?;
        Ok(EmbeddingTable {
            vectors,
            paired,
            epochs,
            loss_history,
        })
    }
}
