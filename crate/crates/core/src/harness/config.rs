use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::movielens::Attribute;
use crate::datagen::GeneratorConfig;
use crate::error::{Error, Result};
use crate::metrics::{Metric, ProbeConfig, DEFAULT_MIN_REC_COUNT};
use crate::neural::NeuralConfig;
use crate::recommenders::{Baseline, LatentHyper};

/// Where the datasets of an experiment come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Generate {
        #[serde(default)]
        generator: GeneratorConfig,
    },
    /// `interactions.tsv` + `demographics.tsv` with 0/1 labels.
    Tsv { interactions: PathBuf, demographics: PathBuf },
    /// Movielens-1M `ratings.dat` + `users.dat`.
    Movielens {
        ratings: PathBuf,
        users: PathBuf,
        attribute: Attribute,
        #[serde(default)]
        min_rating: Option<u32>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Generate {
            generator: GeneratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Pop,
    Rand,
    DemPop,
    MaxDivision,
    Latent {
        #[serde(default)]
        fairness_weight: f64,
        #[serde(default)]
        hyper: LatentHyper,
        /// Report label; defaults to `latent_lambda=<fairness_weight>`.
        #[serde(default)]
        name: Option<String>,
    },
}

impl ModelSpec {
    pub fn baseline(&self) -> Option<Baseline> {
        match self {
            ModelSpec::Pop => Some(Baseline::Pop),
            ModelSpec::Rand => Some(Baseline::Rand),
            ModelSpec::DemPop => Some(Baseline::DemPop),
            ModelSpec::MaxDivision => Some(Baseline::MaxDivision),
            ModelSpec::Latent { .. } => None,
        }
    }

    pub fn latent(fairness_weight: f64) -> ModelSpec {
        ModelSpec::Latent {
            fairness_weight,
            hyper: LatentHyper::default(),
            name: None,
        }
    }

    /// Label used in reports and for seeding. In a fairness sweep the weight
    /// is part of the dataset id, so unnamed latent models are just `latent`.
    pub fn label(&self, sweep: Option<SweepParameter>) -> String {
        match self {
            ModelSpec::Latent { name: Some(name), .. } => name.clone(),
            ModelSpec::Latent { .. } if sweep == Some(SweepParameter::FairnessWeight) => "latent".into(),
            ModelSpec::Latent { fairness_weight, .. } => format!("latent_lambda={fairness_weight}"),
            other => other.baseline().expect("baseline").name().into(),
        }
    }
}

/// Config field varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Epsilon,
    NUsers,
    MinorityRatio,
    FairnessWeight,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Epsilon => "epsilon",
            SweepParameter::NUsers => "n_users",
            SweepParameter::MinorityRatio => "minority_ratio",
            SweepParameter::FairnessWeight => "fairness_weight",
        }
    }

    /// Desk-scale default grid.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepParameter::Epsilon => {
                let mut grid = vec![0.02];
                grid.extend((1..=10).map(|i| f64::from(i) / 10.0));
                grid
            }
            SweepParameter::NUsers => vec![500.0, 1000.0, 2000.0, 3000.0, 4000.0],
            SweepParameter::MinorityRatio => (1..=5).map(|i| f64::from(i) / 10.0).collect(),
            SweepParameter::FairnessWeight => vec![0.0, 0.5, 2.0, 8.0],
        }
    }

    /// Whether the parameter changes the generated data (as opposed to the models).
    pub fn is_data_parameter(self) -> bool {
        self != SweepParameter::FairnessWeight
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// ε values `step, 2 step, ..., 1` for a step that divides 1, built from
/// integer ratios so the printed values stay short.
pub fn epsilon_grid(step: f64) -> Result<Vec<f64>> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("epsilon step {step} does not divide 1")));
    }
    Ok((1..=n as u32).map(|i| f64::from(i) / n).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn with_default_grid(parameter: SweepParameter) -> Self {
        SweepSpec {
            parameter,
            values: parameter.default_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub models: Vec<ModelSpec>,
    pub k: usize,
    pub metrics: Vec<Metric>,
    pub replications: usize,
    pub sweep: Option<SweepSpec>,
    pub master_seed: u64,
    pub test_ratio: f64,
    pub min_rec_count: usize,
    /// Report AUCs as max(a, 1 - a).
    pub fold_auc: bool,
    pub neural: NeuralConfig,
    pub probe: ProbeConfig,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::default(),
            models: vec![
                ModelSpec::Pop,
                ModelSpec::Rand,
                ModelSpec::DemPop,
                ModelSpec::MaxDivision,
                ModelSpec::latent(0.0),
            ],
            k: 40,
            metrics: Metric::ALL.to_vec(),
            replications: 5,
            sweep: None,
            master_seed: 0,
            test_ratio: 0.2,
            min_rec_count: DEFAULT_MIN_REC_COUNT,
            fold_auc: false,
            neural: NeuralConfig::default(),
            probe: ProbeConfig::default(),
            out_dir: None,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sweep_parameter(&self) -> Option<SweepParameter> {
        self.sweep.as_ref().map(|s| s.parameter)
    }

    /// Sweep values, or a single unnamed point.
    pub fn grid(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }

    pub fn dataset_id(&self, value: Option<f64>) -> String {
        match (self.sweep_parameter(), value) {
            (Some(p), Some(v)) => format!("{p}={v}"),
            _ => "base".into(),
        }
    }

    /// Generator config at one sweep value.
    pub fn generator_at(&self, value: Option<f64>) -> Option<GeneratorConfig> {
        let DataSource::Generate { generator } = &self.source else {
            return None;
        };
        let mut generator = generator.clone();
        match (self.sweep_parameter(), value) {
            (Some(SweepParameter::Epsilon), Some(v)) => generator.epsilon = v,
            (Some(SweepParameter::NUsers), Some(v)) => generator.n_users = v as usize,
            (Some(SweepParameter::MinorityRatio), Some(v)) => generator.minority_ratio = v,
            _ => {}
        }
        Some(generator)
    }

    /// Model list at one sweep value.
    pub fn models_at(&self, value: Option<f64>) -> Vec<ModelSpec> {
        let mut models = self.models.clone();
        if let (Some(SweepParameter::FairnessWeight), Some(v)) = (self.sweep_parameter(), value) {
            for model in &mut models {
                if let ModelSpec::Latent { fairness_weight, .. } = model {
                    *fairness_weight = v;
                }
            }
        }
        models
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.models.is_empty() {
            return fail("no models configured".into());
        }
        if self.metrics.is_empty() {
            return fail("no metrics configured".into());
        }
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return fail(format!("test_ratio must be in (0, 1), got {}", self.test_ratio));
        }
        if self.min_rec_count == 0 {
            return fail("min_rec_count must be at least 1".into());
        }
        if self.neural.n_seeds == 0 || self.probe.n_seeds == 0 || self.probe.l2_grid.is_empty() {
            return fail("neural and probe need at least one seed and a nonempty l2 grid".into());
        }
        let mut seen_metrics = HashSet::new();
        if let Some(m) = self.metrics.iter().find(|m| !seen_metrics.insert(**m)) {
            return fail(format!("metric {m} listed twice"));
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return fail(format!("{} sweep has an empty grid", sweep.parameter));
            }
            let mut seen = HashSet::new();
            for &v in &sweep.values {
                if !v.is_finite() {
                    return fail(format!("non-finite sweep value {v}"));
                }
                if !seen.insert(v.to_bits()) {
                    return fail(format!("sweep value {v} listed twice"));
                }
            }
            match (&self.source, sweep.parameter) {
                (DataSource::Generate { .. }, _) | (_, SweepParameter::FairnessWeight) => {}
                _ => {
                    return fail(format!(
                        "a {} sweep needs a generated data source",
                        sweep.parameter
                    ))
                }
            }
            if sweep.parameter == SweepParameter::NUsers {
                if let Some(v) = sweep.values.iter().find(|v| v.fract() != 0.0 || **v < 0.0) {
                    return fail(format!("n_users sweep value {v} is not a count"));
                }
            }
            if sweep.parameter == SweepParameter::FairnessWeight
                && !self.models.iter().any(|m| matches!(m, ModelSpec::Latent { .. }))
            {
                return fail("a fairness_weight sweep needs at least one latent model".into());
            }
        }

        let parameter = self.sweep_parameter();
        for value in self.grid() {
            if let Some(generator) = self.generator_at(value) {
                generator.validate().map_err(|e| match (e, value) {
                    (Error::Config(m), Some(v)) => Error::Config(format!("at {}: {m}", self.dataset_id(Some(v)))),
                    (e, _) => e,
                })?;
                if self.k >= generator.n_items {
                    return fail(format!("k = {} needs more than {} items", self.k, generator.n_items));
                }
            }
            let mut labels = HashSet::new();
            for model in self.models_at(value) {
                let label = model.label(parameter);
                if label.is_empty() || label.contains([',', '"', '\n']) {
                    return fail(format!("model label {label:?} must be nonempty without commas or quotes"));
                }
                if !labels.insert(label.clone()) {
                    return fail(format!("model label {label} appears twice"));
                }
                if let ModelSpec::Latent {
                    fairness_weight, hyper, ..
                } = &model
                {
                    if !(*fairness_weight >= 0.0 && fairness_weight.is_finite()) {
                        return fail(format!("fairness_weight must be finite and >= 0, got {fairness_weight}"));
                    }
                    hyper.validate()?;
                }
            }
        }

        match &self.source {
            DataSource::Generate { .. } => {}
            DataSource::Tsv {
                interactions,
                demographics,
            } => require_files(&[interactions, demographics])?,
            DataSource::Movielens { ratings, users, .. } => require_files(&[ratings, users])?,
        }
        Ok(())
    }
}

fn require_files(paths: &[&PathBuf]) -> Result<()> {
    for path in paths {
        if !path.is_file() {
            return Err(Error::io(
                path.as_path(),
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
    }
    Ok(())
}
