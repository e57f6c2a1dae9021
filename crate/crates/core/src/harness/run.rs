use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde_json::json;

use super::config::{DataSource, ExperimentConfig, ModelSpec, SweepParameter, SweepSpec};
use super::movielens::ingest_movielens;
use crate::data::{split_by_user, DatasetSplit, InteractionDataset, RecommendationTable};
use crate::datagen::generate_dataset;
use crate::error::{Error, Result};
use crate::io::read_dataset;
use crate::metrics::{
    demographic_ratio_auc, fold_auc, group_kendall_tau, item_ratio, representation_auc, write_report,
    DemographicRatioTable, Metric, MetricReport, MetricValue, ProbeConfig,
};
use crate::neural::{NeuralAucEstimator, NeuralConfig};
use crate::recommenders::{latent_recommend_all, latent_representations, recommend_baseline, train_latent};
use crate::seed::SeedSpec;

/// Everything metrics need to know about one train/test split.
pub struct EvalContext {
    pub split: DatasetSplit,
    pub ratios: DemographicRatioTable,
    /// Fitted lazily by the harness only when neural AUC is requested.
    pub neural: Option<std::result::Result<NeuralAucEstimator, String>>,
}

impl EvalContext {
    pub fn new(split: DatasetSplit) -> Self {
        EvalContext {
            ratios: DemographicRatioTable::from_train(&split.train),
            split,
            neural: None,
        }
    }

    pub fn fit_neural(&mut self, config: &NeuralConfig, seed: SeedSpec) {
        self.neural =
            Some(NeuralAucEstimator::fit(&self.split.train, config, seed).map_err(|e| e.code().to_owned()));
    }
}

/// What a model produced for one split.
pub struct ModelOutputs {
    pub test_recs: RecommendationTable,
    /// Needed for neural AUC, whose classifier trains on train-user lists.
    pub train_recs: Option<RecommendationTable>,
    /// (train, test) user representations; `None` for heuristics.
    pub representations: Option<(Array2<f64>, Array2<f64>)>,
}

/// Settings shared by every metric evaluation.
#[derive(Clone, Debug)]
pub struct MetricSettings {
    pub k: usize,
    pub min_rec_count: usize,
    pub fold_auc: bool,
    pub probe: ProbeConfig,
}

impl MetricSettings {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        MetricSettings {
            k: config.k,
            min_rec_count: config.min_rec_count,
            fold_auc: config.fold_auc,
            probe: config.probe.clone(),
        }
    }
}

fn outcome(result: Result<f64>) -> MetricValue {
    match result {
        Ok(v) => MetricValue::Value(v),
        Err(e) => MetricValue::Failed(e.code().to_owned()),
    }
}

/// Computes one metric. Output-level metrics are measured on test users.
pub fn evaluate_metric(
    metric: Metric,
    ctx: &EvalContext,
    outputs: &ModelOutputs,
    settings: &MetricSettings,
    seed: SeedSpec,
) -> MetricValue {
    let train = &ctx.split.train;
    let test = &ctx.split.test;
    let fold = |v: f64| if settings.fold_auc { fold_auc(v) } else { v };
    match metric {
        Metric::DemographicRatioAuc => {
            outcome(demographic_ratio_auc(&ctx.ratios, &outputs.test_recs, test.groups()).map(fold))
        }
        Metric::ItemRatio => outcome(item_ratio(
            &outputs.test_recs,
            test.groups(),
            test.minority_ratio(),
            settings.min_rec_count,
        )),
        Metric::KendallTau => outcome(group_kendall_tau(&outputs.test_recs, test.groups(), settings.k)),
        Metric::NeuralAuc => match (&ctx.neural, &outputs.train_recs) {
            (Some(Ok(estimator)), Some(train_recs)) => outcome(
                estimator
                    .evaluate(train_recs, train.groups(), &outputs.test_recs, test.groups(), seed.derive("neural"))
                    .map(fold),
            ),
            (Some(Err(code)), _) => MetricValue::Failed(code.clone()),
            _ => MetricValue::NotApplicable,
        },
        Metric::RepresentationAuc => match &outputs.representations {
            Some((rep_train, rep_test)) => outcome(
                representation_auc(
                    rep_train.view(),
                    train.groups(),
                    rep_test.view(),
                    test.groups(),
                    &settings.probe,
                    seed.derive("probe"),
                )
                .map(fold),
            ),
            None => MetricValue::NotApplicable,
        },
    }
}

/// Fits a model on the train side and produces what the requested metrics need.
pub fn run_model(
    model: &ModelSpec,
    split: &DatasetSplit,
    k: usize,
    metrics: &[Metric],
    seed: SeedSpec,
) -> Result<ModelOutputs> {
    let need_train_recs = metrics.contains(&Metric::NeuralAuc);
    let (train, test) = (&split.train, &split.test);
    match model {
        ModelSpec::Latent {
            fairness_weight, hyper, ..
        } => {
            let fitted = train_latent(train, hyper, *fairness_weight, seed)?;
            let representations = if metrics.contains(&Metric::RepresentationAuc) {
                let train_users: Vec<usize> = (0..train.n_users()).collect();
                let test_users: Vec<usize> = (0..test.n_users()).collect();
                Some((
                    latent_representations(&fitted, train, &train_users)?.values,
                    latent_representations(&fitted, test, &test_users)?.values,
                ))
            } else {
                None
            };
            Ok(ModelOutputs {
                test_recs: latent_recommend_all(&fitted, test, k)?,
                train_recs: need_train_recs.then(|| latent_recommend_all(&fitted, train, k)).transpose()?,
                representations,
            })
        }
        baseline => {
            let baseline = baseline.baseline().expect("baseline");
            Ok(ModelOutputs {
                test_recs: recommend_baseline(baseline, train, test, k, seed.derive("test"))?,
                train_recs: need_train_recs
                    .then(|| recommend_baseline(baseline, train, train, k, seed.derive("train")))
                    .transpose()?,
                representations: None,
            })
        }
    }
}

/// Per-cell mean and standard deviation over replications.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub dataset_id: String,
    pub model: String,
    pub metric: String,
    pub k: usize,
    /// Replications with a numeric value.
    pub n: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` below two values.
    pub std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<MetricReport>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    fn from_rows(rows: Vec<MetricReport>) -> Self {
        let mut order: Vec<(String, String, String, usize)> = Vec::new();
        let mut cells: BTreeMap<(String, String, String, usize), Vec<&MetricValue>> = BTreeMap::new();
        for row in &rows {
            let key = (row.dataset_id.clone(), row.model.clone(), row.metric.clone(), row.k);
            let values = cells.entry(key.clone()).or_default();
            if values.is_empty() {
                order.push(key);
            }
            values.push(&row.value);
        }
        let summary = order
            .into_iter()
            .map(|key| {
                let values = &cells[&key];
                let numbers: Vec<f64> = values.iter().filter_map(|v| v.value()).collect();
                let n = numbers.len();
                let mean = (n > 0).then(|| numbers.iter().sum::<f64>() / n as f64);
                let std = mean.filter(|_| n > 1).map(|m| {
                    (numbers.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                });
                SummaryRow {
                    failures: values.iter().filter(|v| v.is_failure()).count(),
                    dataset_id: key.0,
                    model: key.1,
                    metric: key.2,
                    k: key.3,
                    n,
                    mean,
                    std,
                }
            })
            .collect();
        SweepResult { rows, summary }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.value.is_failure()).count()
    }

    /// Mean of one summary cell.
    pub fn mean(&self, dataset_id: &str, model: &str, metric: Metric) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.dataset_id == dataset_id && s.model == model && s.metric == metric.name())
            .and_then(|s| s.mean)
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut out = crate::io::create(path)?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |v| v.to_string());
        let mut text = String::from("dataset_id,model,metric,k,n,failures,mean,std\n");
        for s in &self.summary {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.dataset_id,
                s.model,
                s.metric,
                s.k,
                s.n,
                s.failures,
                opt(s.mean),
                opt(s.std)
            ));
        }
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Writes `report.csv`, `summary.csv` and `provenance.json` into `dir`.
    pub fn write_to_dir(&self, config: &ExperimentConfig, dir: &Path) -> Result<()> {
        write_report(&self.rows, &dir.join("report.csv"))?;
        self.write_summary(&dir.join("summary.csv"))?;
        write_provenance(&dir.join("provenance.json"), config)
    }
}

pub fn write_provenance(path: &Path, config: &impl serde::Serialize) -> Result<()> {
    let doc = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    let mut out = crate::io::create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Seed of replication `r` at one sweep value. In a fairness sweep all
/// values share the data, and a replication's model seeds are paired across
/// the grid.
pub fn replication_seed(config: &ExperimentConfig, value: Option<f64>, replication: usize) -> SeedSpec {
    let master = SeedSpec::new(config.master_seed);
    let base = match (config.sweep_parameter(), value) {
        (Some(SweepParameter::FairnessWeight), _) | (None, _) | (_, None) => master.derive("base"),
        (Some(p), Some(v)) => master.derive(p.name()).derive_value("value", v),
    };
    base.derive_index("replication", replication as u64)
}

fn shares_data(config: &ExperimentConfig) -> bool {
    config.sweep_parameter() == Some(SweepParameter::FairnessWeight)
}

fn load_source(config: &ExperimentConfig) -> Result<Option<InteractionDataset>> {
    match &config.source {
        DataSource::Generate { .. } => Ok(None),
        DataSource::Tsv {
            interactions,
            demographics,
        } => read_dataset(interactions, demographics).map(Some),
        DataSource::Movielens {
            ratings,
            users,
            attribute,
            min_rating,
        } => ingest_movielens(ratings, users, *attribute, *min_rating).map(|(l, _)| Some(l.dataset)),
    }
}

fn prepare(
    config: &ExperimentConfig,
    loaded: Option<&InteractionDataset>,
    value: Option<f64>,
    seed: SeedSpec,
) -> Result<EvalContext> {
    let generated;
    let dataset = match loaded {
        Some(d) => d,
        None => {
            let generator = config.generator_at(value).expect("generated source");
            generated = generate_dataset(&generator, seed.derive("data"))?;
            &generated
        }
    };
    let split = split_by_user(dataset, config.test_ratio, seed.derive("split"))?;
    let mut ctx = EvalContext::new(split);
    if config.metrics.contains(&Metric::NeuralAuc) {
        ctx.fit_neural(&config.neural, seed.derive("neural"));
    }
    Ok(ctx)
}

/// Runs every (sweep value, replication, model) cell and returns the rows in
/// grid order, then replication, model and metric order of the config.
/// Failures inside a cell become `ERR:<code>` rows. Writes the output files
/// when the config names an output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let loaded = load_source(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let grid = config.grid();
    let shared = shares_data(config);
    let units: Vec<(usize, usize)> = if shared {
        vec![(0, 0)]
    } else {
        (0..grid.len())
            .flat_map(|g| (0..config.replications).map(move |r| (g, r)))
            .collect()
    };
    let data_seed = |g: usize, r: usize| {
        if shared {
            replication_seed(config, None, 0)
        } else {
            replication_seed(config, grid[g], r)
        }
    };

    let contexts: Vec<Result<EvalContext>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(g, r)| prepare(config, loaded.as_ref(), grid[g], data_seed(g, r)))
            .collect()
    });
    let context_of = |g: usize, r: usize| -> &Result<EvalContext> {
        if shared {
            &contexts[0]
        } else {
            &contexts[g * config.replications + r]
        }
    };

    let parameter = config.sweep_parameter();
    let settings = MetricSettings::from_config(config);
    let mut cells = Vec::new();
    for (g, &value) in grid.iter().enumerate() {
        for r in 0..config.replications {
            for model in config.models_at(value) {
                cells.push((g, r, model));
            }
        }
    }

    let rows: Vec<Vec<MetricReport>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(g, r, model)| {
                let value = grid[*g];
                let rep_seed = replication_seed(config, value, *r);
                let label = model.label(parameter);
                let model_seed = rep_seed.derive("model").derive(&label);
                let values: Vec<MetricValue> = match context_of(*g, *r) {
                    Err(e) => vec![MetricValue::Failed(e.code().to_owned()); config.metrics.len()],
                    Ok(ctx) => match run_model(model, &ctx.split, config.k, &config.metrics, model_seed) {
                        Err(e) => vec![MetricValue::Failed(e.code().to_owned()); config.metrics.len()],
                        Ok(outputs) => config
                            .metrics
                            .iter()
                            .map(|&m| evaluate_metric(m, ctx, &outputs, &settings, model_seed))
                            .collect(),
                    },
                };
                config
                    .metrics
                    .iter()
                    .zip(values)
                    .map(|(metric, value)| MetricReport {
                        dataset_id: config.dataset_id(grid[*g]),
                        model: label.clone(),
                        metric: metric.name().to_owned(),
                        k: config.k,
                        seed: rep_seed.as_u64(),
                        replication: *r,
                        value,
                    })
                    .collect()
            })
            .collect()
    });

    let result = SweepResult::from_rows(rows.into_iter().flatten().collect());
    if let Some(dir) = &config.out_dir {
        result.write_to_dir(config, dir)?;
    }
    Ok(result)
}

fn bind(config: &ExperimentConfig, parameter: SweepParameter) -> ExperimentConfig {
    let mut bound = config.clone();
    match &config.sweep {
        Some(s) if s.parameter == parameter && !s.values.is_empty() => {}
        _ => bound.sweep = Some(SweepSpec::with_default_grid(parameter)),
    }
    bound
}

/// ε sweep; uses the config's ε grid if it has one, else the default grid.
pub fn sweep_epsilon(config: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment(&bind(config, SweepParameter::Epsilon))
}

/// User-count sweep at fixed ε and minority ratio.
pub fn sweep_users(config: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment(&bind(config, SweepParameter::NUsers))
}

pub fn sweep_minority(config: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment(&bind(config, SweepParameter::MinorityRatio))
}

/// Fairness-weight sweep on a single dataset; replications vary the model seed.
pub fn sweep_fairness(config: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment(&bind(config, SweepParameter::FairnessWeight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::GeneratorConfig;
    use crate::recommenders::LatentHyper;

    fn small(sweep: Option<SweepSpec>, models: Vec<ModelSpec>, metrics: Vec<Metric>) -> ExperimentConfig {
        ExperimentConfig {
            source: DataSource::Generate {
                generator: GeneratorConfig {
                    n_users: 120,
                    n_items: 150,
                    ..Default::default()
                },
            },
            models,
            k: 10,
            metrics,
            replications: 2,
            sweep,
            master_seed: 11,
            workers: 2,
            ..Default::default()
        }
    }

    fn tiny_latent(fairness_weight: f64) -> ModelSpec {
        ModelSpec::Latent {
            fairness_weight,
            hyper: LatentHyper {
                latent_dim: 4,
                epochs: 2,
                ..Default::default()
            },
            name: None,
        }
    }

    #[test]
    fn single_cell_gives_one_row() {
        let mut config = small(
            Some(SweepSpec {
                parameter: SweepParameter::Epsilon,
                values: vec![0.5],
            }),
            vec![ModelSpec::Pop],
            vec![Metric::DemographicRatioAuc],
        );
        config.replications = 1;
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.rows[0].dataset_id, "epsilon=0.5");
        assert!(result.rows[0].value.value().is_some());
        assert_eq!(result.summary.len(), 1);
        assert_eq!(result.summary[0].std, None);
    }

    #[test]
    fn row_count_and_na_for_heuristics() {
        let config = small(
            Some(SweepSpec {
                parameter: SweepParameter::Epsilon,
                values: vec![0.1, 0.9],
            }),
            vec![ModelSpec::Pop, ModelSpec::Rand, tiny_latent(1.0)],
            vec![Metric::DemographicRatioAuc, Metric::KendallTau, Metric::RepresentationAuc],
        );
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.rows.len(), 2 * 2 * 3 * 3);
        for row in &result.rows {
            let heuristic = row.model != "latent_lambda=1";
            if row.metric == "representation_auc" && heuristic {
                assert_eq!(row.value, MetricValue::NotApplicable);
            } else {
                assert!(row.value.value().is_some(), "{row:?}");
            }
        }
        assert_eq!(result.summary.len(), 2 * 3 * 3);
        assert_eq!(result.failures(), 0);
    }

    #[test]
    fn output_independent_of_worker_count_and_model_removal() {
        let models = vec![ModelSpec::Pop, ModelSpec::Rand, ModelSpec::DemPop, tiny_latent(0.0)];
        let metrics = vec![Metric::DemographicRatioAuc, Metric::ItemRatio, Metric::NeuralAuc];
        let mut config = small(None, models, metrics);
        config.neural.n_seeds = 1;
        config.neural.embedding.epochs = 1;
        config.workers = 1;
        let one = run_experiment(&config).unwrap();
        config.workers = 4;
        let four = run_experiment(&config).unwrap();
        assert_eq!(one, four);

        config.models.remove(1);
        let fewer = run_experiment(&config).unwrap();
        let without_rand: Vec<_> = one.rows.iter().filter(|r| r.model != "rand").cloned().collect();
        assert_eq!(fewer.rows, without_rand);
    }

    #[test]
    fn failing_cells_become_error_rows() {
        // k close to the item count: users with long histories run out of
        // candidates, but the other cells still complete.
        let mut config = small(None, vec![ModelSpec::Pop, ModelSpec::MaxDivision], vec![Metric::ItemRatio]);
        config.k = 140;
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result.rows.iter().all(|r| r.value == MetricValue::Failed("insufficient-items".into())));
        assert_eq!(result.summary[0].failures, 2);
        assert_eq!(result.summary[0].mean, None);
    }

    #[test]
    fn invalid_config_fails_before_work() {
        let mut config = small(None, vec![ModelSpec::Pop], vec![Metric::ItemRatio]);
        config.k = 0;
        let dir = tempfile::tempdir().unwrap();
        config.out_dir = Some(dir.path().join("out"));
        assert!(matches!(run_experiment(&config), Err(Error::Config(_))));
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn fairness_sweep_shares_data_and_pairs_seeds() {
        let config = small(
            Some(SweepSpec {
                parameter: SweepParameter::FairnessWeight,
                values: vec![0.0, 4.0],
            }),
            vec![ModelSpec::Pop, tiny_latent(0.0)],
            vec![Metric::DemographicRatioAuc],
        );
        let result = run_experiment(&config).unwrap();
        let pop: Vec<_> = result.rows.iter().filter(|r| r.model == "pop").collect();
        // POP ignores the weight, so every pop row is identical across the grid
        assert_eq!(pop[0].value, pop[2].value);
        assert_eq!(pop[0].seed, pop[2].seed);
        assert_ne!(pop[0].seed, pop[1].seed);
        assert!(result.rows.iter().any(|r| r.model == "latent" && r.dataset_id == "fairness_weight=4"));
    }

    #[test]
    fn fairness_grid_of_zero_matches_unswept_latent_run() {
        let mut swept = small(
            Some(SweepSpec {
                parameter: SweepParameter::FairnessWeight,
                values: vec![0.0],
            }),
            vec![tiny_latent(0.0)],
            vec![Metric::DemographicRatioAuc, Metric::RepresentationAuc],
        );
        swept.replications = 1;
        let mut single = swept.clone();
        single.sweep = None;
        if let ModelSpec::Latent { name, .. } = &mut single.models[0] {
            *name = Some("latent".into());
        }
        let a = run_experiment(&swept).unwrap();
        let b = run_experiment(&single).unwrap();
        assert_eq!(a.rows.len(), 2);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((&x.dataset_id[..], &y.dataset_id[..]), ("fairness_weight=0", "base"));
            assert_eq!((&x.model, &x.metric, x.seed, &x.value), (&y.model, &y.metric, y.seed, &y.value));
        }
    }

    #[test]
    fn user_sweep_holds_other_parameters() {
        let config = bind(&small(None, vec![ModelSpec::Pop], vec![Metric::ItemRatio]), SweepParameter::NUsers);
        let a = config.generator_at(Some(500.0)).unwrap();
        let b = config.generator_at(Some(4000.0)).unwrap();
        assert_eq!((a.epsilon, a.minority_ratio), (b.epsilon, b.minority_ratio));
        assert_eq!((a.n_users, b.n_users), (500, 4000));
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small(None, vec![ModelSpec::Pop], vec![Metric::ItemRatio, Metric::KendallTau]);
        config.out_dir = Some(dir.path().to_owned());
        let result = run_experiment(&config).unwrap();
        let rows = crate::metrics::read_report(&dir.path().join("report.csv")).unwrap();
        assert_eq!(rows, result.rows);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        let provenance: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
        assert_eq!(provenance["config"]["master_seed"], 11);
    }
}
