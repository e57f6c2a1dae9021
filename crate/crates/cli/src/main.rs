use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recparity::datagen::{generate_dataset, GeneratorConfig};
use recparity::harness::{
    evaluate_metric, ingest_movielens, run_experiment, sweep_epsilon, sweep_fairness, sweep_minority, sweep_users,
    write_provenance, Attribute, EvalContext, ExperimentConfig, MetricSettings, ModelOutputs,
};
use recparity::io::{
    read_dataset_files, read_recommendations, write_dataset, write_loaded_dataset, write_recommendations,
    DatasetFiles, IdMap, LabelRule, LoadedDataset,
};
use recparity::metrics::{write_report, write_report_to, Metric, MetricReport};
use recparity::recommenders::{
    latent_recommend_all, latent_representations, recommend_baseline, train_latent, Baseline, LatentHyper,
    LatentModel,
};
use recparity::{split_by_user, DatasetSplit, Error, SeedSpec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "recparity", version, about = "Demographic leakage in recommendations: data, models, metrics, sweeps")]
struct Cli {
    /// Master seed (default 0; for `sweep`, overrides the config's master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON config: generator config for `generate`, latent hyperparameters
    /// for `train-latent`, experiment config for `evaluate` and `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate(GenerateArgs),
    /// Convert Movielens-1M files or raw TSVs into a dataset directory.
    Ingest(IngestArgs),
    /// Split a dataset directory into train/ and test/ by user.
    Split(SplitArgs),
    /// Write top-k recommendations for the users of a dataset directory.
    Recommend(RecommendArgs),
    /// Train the latent autoencoder and save model.bin.
    TrainLatent(TrainLatentArgs),
    /// Compute metrics for a recommendations file and write report.csv.
    Evaluate(EvaluateArgs),
    /// Run an experiment config (optionally bound to one sweep).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n_users: Option<usize>,
    #[arg(long)]
    n_items: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    minority_ratio: Option<f64>,
}

#[derive(Args)]
struct IngestArgs {
    /// Movielens `ratings.dat`.
    #[arg(long, requires = "users", conflicts_with = "interactions")]
    ratings: Option<PathBuf>,
    /// Movielens `users.dat`.
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AttributeArg::Gender)]
    attribute: AttributeArg,
    /// Keep only ratings at or above this value (default: every rating).
    #[arg(long)]
    min_rating: Option<u32>,
    /// Raw `user<TAB>item` file.
    #[arg(long, requires = "demographics")]
    interactions: Option<PathBuf>,
    /// Raw `user<TAB>value` file.
    #[arg(long)]
    demographics: Option<PathBuf>,
    /// Raw demographic value that marks label 1.
    #[arg(long, conflicts_with = "at_least")]
    minority_value: Option<String>,
    /// Numeric demographic values at or above this mark label 1.
    #[arg(long)]
    at_least: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttributeArg {
    Gender,
    Age,
}

#[derive(Args)]
struct SplitArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_ratio: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Pop,
    Rand,
    DemPop,
    MaxDivision,
    Latent,
}

#[derive(Args)]
struct RecommendArgs {
    /// Training dataset directory the model is fitted on.
    #[arg(long)]
    train: PathBuf,
    /// Dataset directory of the users to recommend for (default: the train users).
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Trained latent model (required for `--model latent`).
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    k: usize,
}

#[derive(Args)]
struct TrainLatentArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    fairness_weight: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    mask_rate: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Recommendations for the test users.
    #[arg(long)]
    recs: PathBuf,
    /// Recommendations for the train users; enables neural AUC.
    #[arg(long)]
    train_recs: Option<PathBuf>,
    /// Latent model; enables representation AUC.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Comma-separated metric names (default: all).
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[arg(long, default_value = "model")]
    model_name: String,
    #[arg(long, default_value = "dataset")]
    dataset_id: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Epsilon,
    Users,
    Minority,
    Fairness,
}

#[derive(Args)]
struct SweepArgs {
    /// Bind the run to one sweep, using the config's grid when it already
    /// sweeps that parameter and the default grid otherwise.
    #[arg(long, value_enum)]
    kind: Option<SweepKind>,
}

enum Failure {
    Config(String),
    Io(String),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::NoInteractions
            | Error::UnknownUser { .. }
            | Error::MissingLabel { .. }
            | Error::EmptyUser { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult {
    let text = serde_json::to_string_pretty(value).expect("json value serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn require_out(cli: &Cli) -> CliResult<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Failure::Config("--out is required for this command".into()))
}

fn load_dir(dir: &Path) -> CliResult<LoadedDataset> {
    Ok(read_dataset_files(&DatasetFiles::existing_in_dir(dir), &LabelRule::Binary)?)
}

fn generate(cli: &Cli, args: &GenerateArgs) -> CliResult {
    let out = require_out(cli)?;
    let mut config: GeneratorConfig = match &cli.config {
        Some(p) => read_json(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(v) = args.n_users {
        config.n_users = v;
    }
    if let Some(v) = args.n_items {
        config.n_items = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.minority_ratio {
        config.minority_ratio = v;
    }
    config.validate()?;
    let dataset = generate_dataset(&config, SeedSpec::new(cli.seed()))?;
    write_dataset(&dataset, &DatasetFiles::in_dir(out))?;
    write_provenance(&out.join("provenance.json"), &json!({ "generator": config, "seed": cli.seed() }))?;
    eprintln!(
        "generated {} users, {} items, {} interactions (minority ratio {:.3}) into {}",
        dataset.n_users(),
        dataset.n_items(),
        dataset.n_interactions(),
        dataset.minority_ratio(),
        out.display()
    );
    Ok(())
}

fn ingest(cli: &Cli, args: &IngestArgs) -> CliResult {
    let out = require_out(cli)?;
    let (loaded, report) = match (&args.ratings, &args.users, &args.interactions, &args.demographics) {
        (Some(ratings), Some(users), None, None) => {
            let attribute = match args.attribute {
                AttributeArg::Gender => Attribute::Gender,
                AttributeArg::Age => Attribute::Age,
            };
            let (loaded, report) = ingest_movielens(ratings, users, attribute, args.min_rating)?;
            let report = serde_json::to_value(&report).expect("report serializes");
            (loaded, report)
        }
        (None, None, Some(interactions), Some(demographics)) => {
            let rule = match (&args.minority_value, args.at_least) {
                (Some(v), None) => LabelRule::Equals(v.clone()),
                (None, Some(t)) => LabelRule::AtLeast(t),
                _ => LabelRule::Binary,
            };
            let files = DatasetFiles {
                interactions: interactions.clone(),
                demographics: demographics.clone(),
                item_map: None,
                user_map: None,
            };
            let loaded = read_dataset_files(&files, &rule)?;
            let d = &loaded.dataset;
            let report = json!({
                "label_rule": format!("{rule:?}"),
                "n_users": d.n_users(),
                "n_items": d.n_items(),
                "n_interactions": d.n_interactions(),
                "minority_ratio": d.minority_ratio(),
            });
            (loaded, report)
        }
        _ => {
            return Err(Failure::Config(
                "give either --ratings and --users, or --interactions and --demographics".into(),
            ))
        }
    };
    write_loaded_dataset(&loaded, &DatasetFiles::in_dir(out))?;
    write_json(&out.join("ingest_report.json"), &report)?;
    eprintln!(
        "ingested {} users, {} items (minority ratio {:.3}) into {}",
        loaded.dataset.n_users(),
        loaded.dataset.n_items(),
        loaded.dataset.minority_ratio(),
        out.display()
    );
    Ok(())
}

fn split(cli: &Cli, args: &SplitArgs) -> CliResult {
    let out = require_out(cli)?;
    let loaded = load_dir(&args.data)?;
    let split = split_by_user(&loaded.dataset, args.test_ratio, SeedSpec::new(cli.seed()))?;
    for (name, dataset, users) in [
        ("train", &split.train, &split.train_users),
        ("test", &split.test, &split.test_users),
    ] {
        let side = LoadedDataset {
            dataset: dataset.clone(),
            users: IdMap::from_ordered(users.iter().map(|&u| loaded.users.external(u).to_owned()).collect()),
            items: loaded.items.clone(),
        };
        write_loaded_dataset(&side, &DatasetFiles::in_dir(&out.join(name)))?;
    }
    eprintln!(
        "split {} users into {} train / {} test under {}",
        loaded.dataset.n_users(),
        split.train.n_users(),
        split.test.n_users(),
        out.display()
    );
    Ok(())
}

fn recommend(cli: &Cli, args: &RecommendArgs) -> CliResult {
    let out = require_out(cli)?;
    let train = load_dir(&args.train)?.dataset;
    let users = match &args.users {
        Some(dir) => load_dir(dir)?.dataset,
        None => train.clone(),
    };
    let seed = SeedSpec::new(cli.seed());
    let table = match args.model {
        ModelArg::Latent => {
            let path = args
                .model_file
                .as_deref()
                .ok_or_else(|| Failure::Config("--model latent needs --model-file".into()))?;
            latent_recommend_all(&LatentModel::load(path)?, &users, args.k)?
        }
        other => {
            let baseline = match other {
                ModelArg::Pop => Baseline::Pop,
                ModelArg::Rand => Baseline::Rand,
                ModelArg::DemPop => Baseline::DemPop,
                _ => Baseline::MaxDivision,
            };
            recommend_baseline(baseline, &train, &users, args.k, seed)?
        }
    };
    write_recommendations(&table, out)?;
    eprintln!("wrote top-{} lists for {} users to {}", args.k, table.n_users(), out.display());
    Ok(())
}

fn train_latent_cmd(cli: &Cli, args: &TrainLatentArgs) -> CliResult {
    let out = require_out(cli)?;
    let mut hyper: LatentHyper = match &cli.config {
        Some(p) => read_json(p)?,
        None => LatentHyper::default(),
    };
    if let Some(v) = args.latent_dim {
        hyper.latent_dim = v;
    }
    if let Some(v) = args.epochs {
        hyper.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        hyper.learning_rate = v;
    }
    if let Some(v) = args.mask_rate {
        hyper.mask_rate = v;
    }
    let train = load_dir(&args.train)?.dataset;
    let model = train_latent(&train, &hyper, args.fairness_weight, SeedSpec::new(cli.seed()))?;
    model.save(out)?;
    if let Some(last) = model.history.last() {
        eprintln!(
            "trained {} epochs: reconstruction {:.4}, adversary {:.4}; saved {}",
            model.history.len(),
            last.reconstruction,
            last.adversary,
            out.display()
        );
    }
    Ok(())
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> CliResult {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let metrics: Vec<Metric> = match &args.metrics {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?,
        None => Metric::ALL.to_vec(),
    };
    let train = load_dir(&args.train)?.dataset;
    let test = load_dir(&args.test)?.dataset;
    let test_recs = read_recommendations(&args.recs, test.n_users())?;
    let train_recs = args
        .train_recs
        .as_deref()
        .map(|p| read_recommendations(p, train.n_users()))
        .transpose()?;
    let representations = match &args.model_file {
        Some(p) => {
            let model = LatentModel::load(p)?;
            let all = |n: usize| (0..n).collect::<Vec<_>>();
            Some((
                latent_representations(&model, &train, &all(train.n_users()))?.values,
                latent_representations(&model, &test, &all(test.n_users()))?.values,
            ))
        }
        None => None,
    };
    let seed = SeedSpec::new(cli.seed());
    let test_ratio = test.n_users() as f64 / (train.n_users() + test.n_users()) as f64;
    let mut ctx = EvalContext::new(DatasetSplit {
        train_users: (0..train.n_users()).collect(),
        test_users: (0..test.n_users()).collect(),
        train,
        test,
        test_ratio,
    });
    if metrics.contains(&Metric::NeuralAuc) && train_recs.is_some() {
        ctx.fit_neural(&config.neural, seed.derive("neural"));
    }
    let settings = MetricSettings {
        k: test_recs.k(),
        ..MetricSettings::from_config(&config)
    };
    let outputs = ModelOutputs {
        test_recs,
        train_recs,
        representations,
    };
    let rows: Vec<MetricReport> = metrics
        .iter()
        .map(|&m| MetricReport {
            dataset_id: args.dataset_id.clone(),
            model: args.model_name.clone(),
            metric: m.name().to_owned(),
            k: settings.k,
            seed: seed.as_u64(),
            replication: 0,
            value: evaluate_metric(m, &ctx, &outputs, &settings, seed),
        })
        .collect();
    match &cli.out {
        Some(path) => write_report(&rows, path)?,
        None => write_report_to(&rows, std::io::stdout().lock())?,
    }
    let failures = rows.iter().filter(|r| r.value.is_failure()).count();
    if failures > 0 {
        return Err(Failure::Partial(failures));
    }
    Ok(())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> CliResult {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if config.out_dir.is_none() {
        return Err(Failure::Config("sweep needs --out or an out_dir in the config".into()));
    }
    let result = match args.kind {
        None => run_experiment(&config),
        Some(SweepKind::Epsilon) => sweep_epsilon(&config),
        Some(SweepKind::Users) => sweep_users(&config),
        Some(SweepKind::Minority) => sweep_minority(&config),
        Some(SweepKind::Fairness) => sweep_fairness(&config),
    }?;
    let dir = config.out_dir.as_deref().expect("checked");
    eprintln!(
        "{} rows ({} failed) written to {}",
        result.rows.len(),
        result.failures(),
        dir.display()
    );
    match result.failures() {
        0 => Ok(()),
        n => Err(Failure::Partial(n)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(&cli, a),
        Command::Ingest(a) => ingest(&cli, a),
        Command::Split(a) => split(&cli, a),
        Command::Recommend(a) => recommend(&cli, a),
        Command::TrainLatent(a) => train_latent_cmd(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Sweep(a) => sweep(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("warning: {n} measurement(s) failed; see ERR rows");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
