//! Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=3,7` runs a subset. Criteria listed in `KNOWN_FAILURES`
//! are reported as FAIL but do not fail the run; every other failure does.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use recparity::data::{split_by_user, Group, ItemId};
use recparity::datagen::{generate_dataset, GeneratorConfig};
use recparity::harness::{run_experiment, DataSource, ExperimentConfig, ModelSpec, SweepParameter, SweepResult, SweepSpec};
use recparity::metrics::{auc_from_scores, kendall_tau_extended, Metric, ScoredLabels};
use recparity::neural::{
    classifier_gradient, classifier_loss, train_list_classifier, ClassifierParams, NeuralAucEstimator, NeuralConfig,
};
use recparity::recommenders::{batch_gradients, batch_losses, recommend_baseline, Baseline, LatentParams, TrainingRow};
use recparity::SeedSpec;

/// Reproductions that conflict with properties of the metric definitions;
/// see the README section on known deviations.
const KNOWN_FAILURES: &[u32] = &[4];

const N_USERS: usize = 1000;
const N_ITEMS: usize = 2000;
const REPS: usize = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn generator(epsilon: f64) -> GeneratorConfig {
    GeneratorConfig {
        n_users: N_USERS,
        n_items: N_ITEMS,
        epsilon,
        ..Default::default()
    }
}

fn base_config(epsilon: f64) -> ExperimentConfig {
    ExperimentConfig {
        source: DataSource::Generate {
            generator: generator(epsilon),
        },
        replications: REPS,
        master_seed: 2024,
        workers: 0,
        ..Default::default()
    }
}

fn epsilon_sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        models: vec![
            ModelSpec::Pop,
            ModelSpec::Rand,
            ModelSpec::DemPop,
            ModelSpec::MaxDivision,
            ModelSpec::latent(0.0),
            ModelSpec::latent(2.0),
        ],
        metrics: vec![Metric::DemographicRatioAuc, Metric::NeuralAuc, Metric::ItemRatio, Metric::KendallTau],
        sweep: Some(SweepSpec {
            parameter: SweepParameter::Epsilon,
            values: vec![0.02, 0.5, 1.0],
        }),
        ..base_config(0.5)
    }
}

fn mean_of(result: &SweepResult, dataset_id: &str, model: &str, metric: Metric) -> f64 {
    result.mean(dataset_id, model, metric).unwrap_or(f64::NAN)
}

fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn criterion_1() -> Outcome {
    let mut rng = SeedSpec::new(1).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..=20);
        let mut labels: Vec<Group> = (0..n)
            .map(|_| if rng.random_bool(0.4) { Group::Minority } else { Group::Majority })
            .collect();
        labels[0] = Group::Minority;
        labels[1] = Group::Majority;
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let pos: Vec<f64> = (0..n).filter(|&i| labels[i].is_minority()).map(|i| scores[i]).collect();
        let neg: Vec<f64> = (0..n).filter(|&i| !labels[i].is_minority()).map(|i| scores[i]).collect();
        let fast = auc_from_scores(&ScoredLabels::new(scores, labels).unwrap()).unwrap();
        worst = worst.max((fast - brute_force_auc(&pos, &neg)).abs());
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |rank AUC - pairwise AUC| = {worst:e} over 1000 tied instances"),
    }
}

fn criterion_2() -> Outcome {
    let identical = kendall_tau_extended(&[4, 9, 1, 7], &[4, 9, 1, 7]).unwrap();
    let disjoint = kendall_tau_extended(&[1, 2, 3], &[4, 5, 6]).unwrap();
    let worked = kendall_tau_extended(&[0, 1, 2], &[0, 2, 1]).unwrap();
    Outcome {
        pass: identical == 1.0 && disjoint == -1.0 && worked == 1.0 / 3.0,
        detail: format!("identical {identical}, disjoint {disjoint}, [x,y,z] vs [x,z,y] {worked}"),
    }
}

fn criterion_3(sweep: &SweepResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for model in ["dem_pop", "max_division"] {
        let dr = mean_of(sweep, "epsilon=0.02", model, Metric::DemographicRatioAuc);
        let na = mean_of(sweep, "epsilon=0.02", model, Metric::NeuralAuc);
        pass &= dr >= 0.95 && na >= 0.90;
        parts.push(format!("{model} DR-AUC {dr:.3} neural {na:.3}"));
    }
    Outcome {
        pass,
        detail: format!("eps=0.02: {}", parts.join(", ")),
    }
}

fn criterion_4(sweep: &SweepResult, config: &ExperimentConfig) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for model in &config.models {
        let label = model.label(config.sweep_parameter());
        let dr = mean_of(sweep, "epsilon=1", &label, Metric::DemographicRatioAuc);
        let na = mean_of(sweep, "epsilon=1", &label, Metric::NeuralAuc);
        let ok = (0.45..=0.60).contains(&dr) && (0.45..=0.60).contains(&na);
        pass &= ok;
        parts.push(format!("{label} {dr:.3}/{na:.3}{}", if ok { "" } else { "!" }));
    }
    Outcome {
        pass,
        detail: format!("eps=1 DR-AUC/neural: {}", parts.join(", ")),
    }
}

fn criterion_5(sweep: &SweepResult) -> Outcome {
    let dr = mean_of(sweep, "epsilon=0.5", "pop", Metric::DemographicRatioAuc);
    Outcome {
        pass: dr < 0.5,
        detail: format!("eps=0.5 POP DR-AUC {dr:.3}"),
    }
}

fn criterion_6(sweep: &SweepResult) -> Outcome {
    let values: Vec<String> = ["epsilon=0.02", "epsilon=0.5", "epsilon=1"]
        .iter()
        .map(|id| mean_of(sweep, id, "rand", Metric::KendallTau))
        .map(|v| format!("{v:.3}"))
        .collect();
    let worst = ["epsilon=0.02", "epsilon=0.5", "epsilon=1"]
        .iter()
        .map(|id| mean_of(sweep, id, "rand", Metric::KendallTau))
        .fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        pass: worst <= -0.8,
        detail: format!("RAND Kendall-Tau at eps 0.02/0.5/1 with {N_ITEMS} items: {}", values.join("/")),
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        for &o in &order[i..=j] {
            out[o] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn criterion_7() -> Outcome {
    let config = ExperimentConfig {
        models: vec![ModelSpec::latent(0.0)],
        metrics: vec![Metric::RepresentationAuc, Metric::DemographicRatioAuc],
        sweep: Some(SweepSpec {
            parameter: SweepParameter::Epsilon,
            values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }),
        ..base_config(0.5)
    };
    let result = run_experiment(&config).expect("sweep runs");
    let mut pairs: BTreeMap<(String, usize), [f64; 2]> = BTreeMap::new();
    for row in &result.rows {
        let slot = usize::from(row.metric == Metric::DemographicRatioAuc.name());
        pairs.entry((row.dataset_id.clone(), row.replication)).or_insert([f64::NAN; 2])[slot] =
            row.value.value().unwrap_or(f64::NAN);
    }
    let rep: Vec<f64> = pairs.values().map(|p| p[0]).collect();
    let dr: Vec<f64> = pairs.values().map(|p| p[1]).collect();
    let r = pearson(&rep, &dr);
    let means: Vec<String> = config.sweep.as_ref().unwrap().values.iter()
        .map(|v| {
            let id = format!("epsilon={v}");
            format!(
                "{:.2}/{:.2}",
                mean_of(&result, &id, "latent_lambda=0", Metric::RepresentationAuc),
                mean_of(&result, &id, "latent_lambda=0", Metric::DemographicRatioAuc)
            )
        })
        .collect();
    Outcome {
        pass: r >= 0.9,
        detail: format!("Pearson(RepAUC, DR-AUC) = {r:.3} over {} runs; per-eps means {}", rep.len(), means.join(" ")),
    }
}

fn criterion_8() -> Outcome {
    let grid = vec![0.0, 0.5, 2.0, 8.0];
    let config = ExperimentConfig {
        models: vec![ModelSpec::latent(0.0)],
        metrics: vec![Metric::RepresentationAuc, Metric::DemographicRatioAuc, Metric::ItemRatio],
        sweep: Some(SweepSpec {
            parameter: SweepParameter::FairnessWeight,
            values: grid.clone(),
        }),
        ..base_config(0.3)
    };
    let result = run_experiment(&config).expect("sweep runs");
    let mut pass = true;
    let mut parts = Vec::new();
    for metric in [Metric::RepresentationAuc, Metric::DemographicRatioAuc, Metric::ItemRatio] {
        let means: Vec<f64> = grid
            .iter()
            .map(|l| mean_of(&result, &format!("fairness_weight={l}"), "latent", metric))
            .collect();
        let rho = spearman(&grid, &means);
        pass &= rho <= -0.8;
        let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
        parts.push(format!("{metric} [{}] rho {rho:.2}", shown.join(", ")));
    }
    Outcome {
        pass,
        detail: format!("lambda 0/0.5/2/8 at eps=0.3: {}", parts.join("; ")),
    }
}

fn criterion_9() -> Outcome {
    let users = vec![500.0, 1000.0, 2000.0];
    let config = ExperimentConfig {
        models: vec![ModelSpec::Rand],
        metrics: vec![Metric::ItemRatio],
        sweep: Some(SweepSpec {
            parameter: SweepParameter::NUsers,
            values: users.clone(),
        }),
        ..base_config(0.5)
    };
    let result = run_experiment(&config).expect("sweep runs");
    let means: Vec<f64> = users
        .iter()
        .map(|u| mean_of(&result, &format!("n_users={u}"), "rand", Metric::ItemRatio))
        .collect();
    Outcome {
        pass: means.windows(2).all(|w| w[1] < w[0]),
        detail: format!(
            "RAND item ratio at 500/1000/2000 users: {}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" > ")
        ),
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every entry of `blocks`.
fn worst_gradient_error(
    n_blocks: usize,
    get: &dyn Fn(usize, usize) -> f64,
    len: &dyn Fn(usize) -> usize,
    loss_at: &dyn Fn(usize, usize, f64) -> f64,
    analytic: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for block in 0..n_blocks {
        for j in 0..len(block) {
            let x = get(block, j);
            let numeric = (loss_at(block, j, x + h) - loss_at(block, j, x - h)) / (2.0 * h);
            worst = worst.max(relative_error(analytic(block, j), numeric));
        }
    }
    worst
}

fn latent_gradient_error() -> f64 {
    let (n_items, d) = (8, 3);
    let mut rng = SeedSpec::new(5).rng();
    let mut params = LatentParams::zeros(n_items, d);
    for block in params.blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    let spec: [(&[ItemId], &[ItemId], Group); 5] = [
        (&[0, 1], &[2], Group::Minority),
        (&[3], &[4, 5], Group::Majority),
        (&[6, 7], &[1], Group::Majority),
        (&[2, 5], &[0, 7], Group::Minority),
        (&[4], &[3, 6], Group::Majority),
    ];
    let rows: Vec<TrainingRow> = spec
        .iter()
        .map(|(i, t, g)| TrainingRow {
            input: i.to_vec(),
            target: t.to_vec(),
            group: *g,
        })
        .collect();
    let (rec, adv) = batch_gradients(&params, &rows, true);
    let adv = adv.expect("adversary gradient");
    let mut worst: f64 = 0.0;
    for (component, grad) in [(0, &rec), (1, &adv)] {
        let loss_at = |block: usize, j: usize, value: f64| {
            let mut p = params.clone();
            p.blocks_mut()[block][j] = value;
            let (r, a) = batch_losses(&p, &rows);
            if component == 0 {
                r
            } else {
                a
            }
        };
        worst = worst.max(worst_gradient_error(
            6,
            &|b, j| params.blocks()[b][j],
            &|b| params.blocks()[b].len(),
            &loss_at,
            &|b, j| grad.blocks()[b][j],
        ));
    }
    worst
}

fn classifier_gradient_error() -> f64 {
    let mut rng = SeedSpec::new(6).rng();
    let (n, features, hidden) = (12, 5, 4);
    let x = Array2::from_shape_fn((n, features), |_| rng.random_range(-1.0..1.0));
    let y: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
    let mut params = ClassifierParams::zeros(features, hidden);
    for block in params.blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.random_range(-0.7..0.7);
        }
    }
    let grad = classifier_gradient(&params, x.view(), &y);
    let loss_at = |block: usize, j: usize, value: f64| {
        let mut p = params.clone();
        p.blocks_mut()[block][j] = value;
        classifier_loss(&p, x.view(), &y)
    };
    worst_gradient_error(
        4,
        &|b, j| params.blocks()[b][j],
        &|b| params.blocks()[b].len(),
        &loss_at,
        &|b, j| grad.blocks()[b][j],
    )
}

fn criterion_10() -> Outcome {
    let dataset = generate_dataset(&generator(0.5), SeedSpec::new(31)).unwrap();
    let split = split_by_user(&dataset, 0.2, SeedSpec::new(32)).unwrap();
    let estimator = NeuralAucEstimator::fit(&split.train, &NeuralConfig::default(), SeedSpec::new(33)).unwrap();

    let mut null_parts = Vec::new();
    let mut null_ok = true;
    for baseline in [Baseline::Pop, Baseline::Rand, Baseline::DemPop] {
        let train_recs = recommend_baseline(baseline, &split.train, &split.train, 40, SeedSpec::new(34)).unwrap();
        let test_recs = recommend_baseline(baseline, &split.train, &split.test, 40, SeedSpec::new(35)).unwrap();
        let mut total = 0.0;
        for s in 0..5u64 {
            let mut train_labels = split.train.groups().to_vec();
            let mut test_labels = split.test.groups().to_vec();
            train_labels.shuffle(&mut SeedSpec::new(100 + s).rng());
            test_labels.shuffle(&mut SeedSpec::new(200 + s).rng());
            total += estimator
                .evaluate(&train_recs, &train_labels, &test_recs, &test_labels, SeedSpec::new(300 + s))
                .unwrap();
        }
        let mean = total / 5.0;
        null_ok &= (0.45..=0.55).contains(&mean);
        null_parts.push(format!("{baseline} {mean:.3}"));
    }

    let recs = recommend_baseline(Baseline::DemPop, &split.train, &split.train, 40, SeedSpec::new(36)).unwrap();
    let before: Vec<u64> = estimator.embeddings.vectors.iter().map(|v| v.to_bits()).collect();
    train_list_classifier(
        &estimator.embeddings,
        &estimator.polarization,
        &recs,
        split.train.groups(),
        &estimator.config.classifier,
        SeedSpec::new(37),
    )
    .unwrap();
    let after: Vec<u64> = estimator.embeddings.vectors.iter().map(|v| v.to_bits()).collect();
    let frozen = before == after;

    let latent_err = latent_gradient_error();
    let classifier_err = classifier_gradient_error();
    Outcome {
        pass: null_ok && frozen && latent_err < 1e-4 && classifier_err < 1e-4,
        detail: format!(
            "shuffled-label neural AUC {}; embeddings frozen: {frozen}; max rel. gradient error latent {latent_err:.1e}, classifier {classifier_err:.1e}",
            null_parts.join(", ")
        ),
    }
}

fn criterion_11(config: &ExperimentConfig, first_dir: &Path) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    let mut rerun = config.clone();
    rerun.out_dir = Some(second.path().to_owned());
    run_experiment(&rerun).expect("rerun");
    let mut identical = true;
    let mut sizes = Vec::new();
    for name in ["report.csv", "summary.csv"] {
        let a = std::fs::read(first_dir.join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        identical &= a == b;
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    Outcome {
        pass: identical,
        detail: format!("rerun byte-identical: {identical} ({})", sizes.join(", ")),
    }
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));
    let mut unexpected = Vec::new();
    let mut report = |id: u32, title: &str, started: Instant, outcome: Outcome| {
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        let note = if !outcome.pass && KNOWN_FAILURES.contains(&id) { " (known)" } else { "" };
        println!(
            "criterion {id:>2} {status}{note} {title}: {} [{:.0?}]",
            outcome.detail,
            started.elapsed()
        );
        if !outcome.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    };

    if wanted(1) {
        report(1, "AUC oracle equivalence", Instant::now(), criterion_1());
    }
    if wanted(2) {
        report(2, "Kendall endpoints", Instant::now(), criterion_2());
    }
    if [3, 4, 5, 6, 11].iter().any(|&c| wanted(c)) {
        let started = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let mut config = epsilon_sweep_config();
        config.out_dir = Some(dir.path().to_owned());
        let sweep = run_experiment(&config).expect("epsilon sweep runs");
        assert_eq!(sweep.rows.len(), 3 * REPS * 6 * 4);
        assert_eq!(sweep.failures(), 0, "epsilon sweep has error rows");
        println!("epsilon sweep: {} rows in {:.0?}", sweep.rows.len(), started.elapsed());
        if wanted(3) {
            report(3, "discriminatory baselines saturate", started, criterion_3(&sweep));
        }
        if wanted(4) {
            report(4, "overlap kills signal", started, criterion_4(&sweep, &config));
        }
        if wanted(5) {
            report(5, "POP inversion", started, criterion_5(&sweep));
        }
        if wanted(6) {
            report(6, "RAND aggregates diverge", started, criterion_6(&sweep));
        }
        if wanted(11) {
            let t = Instant::now();
            report(11, "sweep determinism", t, criterion_11(&config, dir.path()));
        }
    }
    if wanted(7) {
        report(7, "representation/recommendation linearity", Instant::now(), criterion_7());
    }
    if wanted(8) {
        report(8, "fairness knob monotonicity", Instant::now(), criterion_8());
    }
    if wanted(9) {
        report(9, "item ratio precision effect", Instant::now(), criterion_9());
    }
    if wanted(10) {
        report(10, "neural classifier controls", Instant::now(), criterion_10());
    }

    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}
