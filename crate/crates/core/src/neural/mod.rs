//! Neural AUC: how well a classifier recovers a user's group from the
//! recommendation list alone.
//!
//! Item embeddings are pretrained once per training set on co-liked item
//! pairs, then frozen. A list classifier is trained on the recommendations
//! of training users and scored on test users; the reported value is the
//! test AUC averaged over several classifier seeds.

mod classifier;
mod embedding;

use serde::{Deserialize, Serialize};

pub use classifier::{
    classifier_gradient, classifier_loss, neural_auc, pooled_features, train_list_classifier, ClassifierHyper,
    ClassifierParams, ListClassifier,
};
pub use embedding::{
    cosine, sample_skipgram_pairs, train_item_embeddings, EmbeddingHyper, EmbeddingTable, SkipGramPairs,
};

use crate::data::{Group, InteractionDataset, RecommendationTable};
use crate::error::Result;
use crate::metrics::DemographicRatioTable;
use crate::seed::SeedSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub max_neighbors: usize,
    pub embedding: EmbeddingHyper,
    pub classifier: ClassifierHyper,
    /// Classifier seeds whose test AUCs are averaged.
    pub n_seeds: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            max_neighbors: 5,
            embedding: EmbeddingHyper::default(),
            classifier: ClassifierHyper::default(),
            n_seeds: 5,
        }
    }
}

/// Frozen embeddings and demographic ratios of one training set, reusable
/// across every recommender evaluated on it.
#[derive(Clone, Debug)]
pub struct NeuralAucEstimator {
    pub embeddings: EmbeddingTable,
    pub polarization: DemographicRatioTable,
    pub config: NeuralConfig,
}

impl NeuralAucEstimator {
    pub fn fit(train: &InteractionDataset, config: &NeuralConfig, seed: SeedSpec) -> Result<Self> {
        let pairs = sample_skipgram_pairs(train, config.max_neighbors, seed.derive("pairs"));
        let embeddings = train_item_embeddings(&pairs, &config.embedding, seed.derive("embedding"))?;
        Ok(NeuralAucEstimator {
            embeddings,
            polarization: DemographicRatioTable::from_train(train),
            config: config.clone(),
        })
    }

    pub fn train_classifiers(
        &self,
        train_recs: &RecommendationTable,
        train_labels: &[Group],
        seed: SeedSpec,
    ) -> Result<Vec<ListClassifier>> {
        (0..self.config.n_seeds.max(1))
            .map(|s| {
                train_list_classifier(
                    &self.embeddings,
                    &self.polarization,
                    train_recs,
                    train_labels,
                    &self.config.classifier,
                    seed.derive_index("classifier", s as u64),
                )
            })
            .collect()
    }

    /// Trains the classifiers on train-user lists and returns their mean
    /// test AUC.
    pub fn evaluate(
        &self,
        train_recs: &RecommendationTable,
        train_labels: &[Group],
        test_recs: &RecommendationTable,
        test_labels: &[Group],
        seed: SeedSpec,
    ) -> Result<f64> {
        let classifiers = self.train_classifiers(train_recs, train_labels, seed)?;
        neural_auc(&classifiers, &self.embeddings, &self.polarization, test_recs, test_labels)
    }
}
