//! Browser bindings: dataset generation summaries, baseline leakage and a
//! small ranked-list/AUC calculator. Every export returns a JSON string.

use recparity::datagen::stats::{group_top_overlap, group_total_variation, head_share};
use recparity::datagen::{generate_dataset, GeneratorConfig};
use recparity::harness::{evaluate_metric, EvalContext, MetricSettings, ModelOutputs};
use recparity::metrics::{auc_from_scores, kendall_tau_extended, Metric, MetricValue, ProbeConfig, ScoredLabels};
use recparity::recommenders::{recommend_baseline, Baseline};
use recparity::{split_by_user, Error, Group, InteractionDataset, ItemId, Result, SeedSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn config_from(json: &str) -> Result<GeneratorConfig> {
    let config: GeneratorConfig = if json.trim().is_empty() {
        GeneratorConfig::default()
    } else {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

fn stats(d: &InteractionDataset) -> Value {
    json!({
        "n_users": d.n_users(),
        "n_items": d.n_items(),
        "n_interactions": d.n_interactions(),
        "minority_ratio": d.minority_ratio(),
        "top50_overlap": group_top_overlap(d, 50),
        "group_total_variation": group_total_variation(d),
        "top20pct_share": head_share(d, 0.2),
    })
}

/// Generates a dataset and describes how far apart the two groups are.
pub fn dataset_summary(config_json: &str, seed: u64) -> Result<Value> {
    let config = config_from(config_json)?;
    Ok(stats(&generate_dataset(&config, SeedSpec::new(seed))?))
}

fn value(v: MetricValue) -> Value {
    match v {
        MetricValue::Value(x) => json!(x),
        other => json!(other.to_string()),
    }
}

/// Generates a dataset, splits it 80/20 and measures leakage of the four
/// heuristic recommenders on the test users.
pub fn baseline_leakage(config_json: &str, seed: u64, k: usize) -> Result<Value> {
    let config = config_from(config_json)?;
    let seed = SeedSpec::new(seed);
    let data = generate_dataset(&config, seed.derive("data"))?;
    let ctx = EvalContext::new(split_by_user(&data, 0.2, seed.derive("split"))?);
    let settings = MetricSettings {
        k,
        min_rec_count: recparity::metrics::DEFAULT_MIN_REC_COUNT,
        fold_auc: false,
        probe: ProbeConfig::default(),
    };
    let mut rows = Vec::new();
    for baseline in Baseline::ALL {
        let model_seed = seed.derive("model").derive(baseline.name());
        let outputs = ModelOutputs {
            test_recs: recommend_baseline(baseline, &ctx.split.train, &ctx.split.test, k, model_seed.derive("test"))?,
            train_recs: None,
            representations: None,
        };
        let metric = |m| value(evaluate_metric(m, &ctx, &outputs, &settings, model_seed));
        rows.push(json!({
            "model": baseline.name(),
            "demographic_ratio_auc": metric(Metric::DemographicRatioAuc),
            "item_ratio": metric(Metric::ItemRatio),
            "kendall_tau": metric(Metric::KendallTau),
        }));
    }
    Ok(json!({ "dataset": stats(&data), "k": k, "models": rows }))
}

fn numbers<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidArgument(format!("bad {what} `{s}`"))))
        .collect()
}

/// Extended Kendall-Tau between two ranked item lists.
pub fn kendall(list_a: &str, list_b: &str) -> Result<Value> {
    let a: Vec<ItemId> = numbers(list_a, "item")?;
    let b: Vec<ItemId> = numbers(list_b, "item")?;
    Ok(json!({ "tau": kendall_tau_extended(&a, &b)? }))
}

/// AUC of scores against 0/1 labels (1 = minority), ties counted as one half.
pub fn auc(scores: &str, labels: &str) -> Result<Value> {
    let scores: Vec<f64> = numbers(scores, "score")?;
    let labels: Vec<u8> = numbers(labels, "label")?;
    let groups = labels
        .iter()
        .map(|&l| Group::from_label(l).ok_or_else(|| Error::InvalidArgument(format!("label {l} is not 0 or 1"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "auc": auc_from_scores(&ScoredLabels::new(scores, groups)?)? }))
}

fn export(result: Result<Value>) -> std::result::Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = datasetSummary)]
pub fn dataset_summary_js(config_json: &str, seed: u32) -> std::result::Result<String, JsError> {
    export(dataset_summary(config_json, seed.into()))
}

#[wasm_bindgen(js_name = baselineLeakage)]
pub fn baseline_leakage_js(config_json: &str, seed: u32, k: u32) -> std::result::Result<String, JsError> {
    export(baseline_leakage(config_json, seed.into(), k as usize))
}

#[wasm_bindgen(js_name = kendallTau)]
pub fn kendall_js(list_a: &str, list_b: &str) -> std::result::Result<String, JsError> {
    export(kendall(list_a, list_b))
}

#[wasm_bindgen(js_name = aucFromScores)]
pub fn auc_js(scores: &str, labels: &str) -> std::result::Result<String, JsError> {
    export(auc(scores, labels))
}
