//! Encoding, evaluation and gamma selection over whole datasets, spread over
//! a worker pool with results kept in input order.

use std::time::Instant;

use pointgn_core::classifier::{classify_values, loo_correct_counts, loo_predictions, pick_gamma};
use pointgn_core::{
    build_bank, encode, ClassificationResult, ConfusionMatrix, EncoderConfig, FeatureBank,
    GammaSelection, GlobalFeature, PointCloud,
};
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// A pool of `threads` workers; 0 means one per available core.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Encodes every cloud; the output is in input order whatever the pool size.
pub fn encode_all(
    pool: &rayon::ThreadPool,
    clouds: &[PointCloud],
    config: &EncoderConfig,
) -> Result<Vec<GlobalFeature>> {
    pool.install(|| {
        clouds
            .par_iter()
            .enumerate()
            .map(|(i, c)| encode(c, config).map_err(|e| Error::Eval(format!("cloud {i}: {e}"))))
            .collect()
    })
}

/// Encodes a split and stacks it into a bank named after its classes.
pub fn build_dataset_bank(
    pool: &rayon::ThreadPool,
    dataset: &LabeledDataset,
    config: &EncoderConfig,
) -> Result<FeatureBank> {
    let feats = encode_all(pool, &dataset.clouds, config)?;
    bank_from_features(&feats, &dataset.labels(), dataset.class_names.clone())
}

pub fn bank_from_features(
    feats: &[GlobalFeature],
    labels: &[usize],
    class_names: Vec<String>,
) -> Result<FeatureBank> {
    let bank = build_bank(feats.iter().zip(labels.iter().copied()), class_names.len())?;
    Ok(bank.with_class_names(class_names)?)
}

/// Errors unless the bank was built with `config`, or `force` is set, in
/// which case a warning text is returned instead.
pub fn check_fingerprint(
    bank: &FeatureBank,
    config: &EncoderConfig,
    force: bool,
) -> Result<Option<String>> {
    let want = config.fingerprint();
    if bank.fingerprint() == want {
        return Ok(None);
    }
    let msg = format!(
        "bank was built with encoder fingerprint {:016x}, current settings give {want:016x}",
        bank.fingerprint()
    );
    if force {
        Ok(Some(msg))
    } else {
        Err(Error::Config(format!(
            "{msg}; pass --force to evaluate anyway"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    pub top_similarity: f64,
    pub probability: f64,
}

/// Outcome of classifying a labelled split against a bank.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub mean_class_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub class_names: Vec<String>,
    pub predictions: Vec<Prediction>,
    pub gamma: f64,
    pub encode_time_s: f64,
    pub classify_time_s: f64,
    pub wall_time_s: f64,
    /// Samples per second over the whole encode + classify run.
    pub throughput: f64,
    pub threads: usize,
    pub warnings: Vec<String>,
    /// Resolved settings, `(key, value)`.
    pub config_echo: Vec<(String, String)>,
}

/// Classifies already encoded queries; returns one result per query.
pub fn classify_all(
    pool: &rayon::ThreadPool,
    feats: &[GlobalFeature],
    bank: &FeatureBank,
    gamma: f64,
) -> Result<Vec<ClassificationResult>> {
    pool.install(|| {
        feats
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                classify_values(&f.values, bank, gamma)
                    .map_err(|e| Error::Eval(format!("query {i}: {e}")))
            })
            .collect()
    })
}

/// Confusion matrix of `feats` (true classes `labels`) against the bank.
pub fn confusion_for(
    pool: &rayon::ThreadPool,
    feats: &[GlobalFeature],
    labels: &[usize],
    bank: &FeatureBank,
    gamma: f64,
) -> Result<ConfusionMatrix> {
    let results = classify_all(pool, feats, bank, gamma)?;
    let mut cm = ConfusionMatrix::new(bank.num_classes());
    for (r, &l) in results.iter().zip(labels) {
        cm.record(l, r.predicted_class);
    }
    Ok(cm)
}

/// Encodes and classifies every cloud of `test`.
pub fn evaluate(
    pool: &rayon::ThreadPool,
    bank: &FeatureBank,
    test: &LabeledDataset,
    config: &EncoderConfig,
    gamma: f64,
) -> Result<EvalReport> {
    if test.num_classes() != bank.num_classes() {
        return Err(Error::Config(format!(
            "test split has {} classes, bank has {}",
            test.num_classes(),
            bank.num_classes()
        )));
    }
    if test.is_empty() {
        return Err(Error::Eval("test split is empty".into()));
    }
    let start = Instant::now();
    let feats = encode_all(pool, &test.clouds, config)?;
    let encoded = Instant::now();
    let results = classify_all(pool, &feats, bank, gamma)?;
    let done = Instant::now();
    let labels = test.labels();
    let mut confusion = ConfusionMatrix::new(bank.num_classes());
    let mut predictions = Vec::with_capacity(results.len());
    for (i, (r, &label)) in results.iter().zip(&labels).enumerate() {
        confusion.record(label, r.predicted_class);
        predictions.push(Prediction {
            index: i,
            label,
            predicted: r.predicted_class,
            top_similarity: r.top_similarity,
            probability: r.probabilities[r.predicted_class],
        });
    }
    let wall = (done - start).as_secs_f64();
    Ok(EvalReport {
        overall_accuracy: confusion.accuracy(),
        mean_class_accuracy: confusion.mean_class_accuracy(),
        per_class_accuracy: confusion.per_class_accuracy(),
        confusion,
        class_names: bank.class_names().to_vec(),
        predictions,
        gamma,
        encode_time_s: (encoded - start).as_secs_f64(),
        classify_time_s: (done - encoded).as_secs_f64(),
        wall_time_s: wall,
        throughput: if wall > 0.0 {
            labels.len() as f64 / wall
        } else {
            f64::INFINITY
        },
        threads: pool.current_num_threads(),
        warnings: Vec::new(),
        config_echo: Vec::new(),
    })
}

/// Leave-one-out gamma selection with the rows spread over the pool.
pub fn select_gamma(
    pool: &rayon::ThreadPool,
    bank: &FeatureBank,
    candidates: &[f64],
) -> Result<GammaSelection> {
    let preds: Vec<Vec<usize>> = pool.install(|| {
        (0..bank.len())
            .into_par_iter()
            .map(|i| loo_predictions(bank, i, candidates))
            .collect()
    });
    let correct = loo_correct_counts(bank, candidates, preds)?;
    Ok(pick_gamma(bank.len(), candidates, &correct))
}

/// Accuracies of a few-shot run.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotReport {
    pub way: usize,
    pub shot: usize,
    pub queries_per_class: usize,
    pub per_run: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over runs (0 for a single run).
    pub std: f64,
}

/// Runs `runs` episodes over `pool_set`: per episode, a bank of the support
/// clouds classifies the query clouds. Each needed cloud is encoded once.
#[allow(clippy::too_many_arguments)]
pub fn run_fewshot(
    pool: &rayon::ThreadPool,
    pool_set: &LabeledDataset,
    config: &EncoderConfig,
    gamma: f64,
    way: usize,
    shot: usize,
    queries_per_class: usize,
    runs: usize,
    seed: u64,
) -> Result<FewShotReport> {
    if runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    if way < 2 {
        return Err(Error::Config("few-shot episodes need way >= 2".into()));
    }
    let episodes = pool_set.fewshot_episodes(way, shot, queries_per_class, runs, seed)?;
    let mut needed: Vec<usize> = episodes
        .iter()
        .flat_map(|e| e.support.iter().chain(&e.query).map(|&(i, _)| i))
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let clouds: Vec<PointCloud> = needed.iter().map(|&i| pool_set.clouds[i].clone()).collect();
    let feats = encode_all(pool, &clouds, config)?;
    let feature_of = |i: usize| &feats[needed.binary_search(&i).unwrap()];
    let names: Vec<String> = (0..way).map(|c| format!("episode_class_{c}")).collect();
    let mut per_run = Vec::with_capacity(runs);
    for ep in &episodes {
        let support: Vec<GlobalFeature> = ep
            .support
            .iter()
            .map(|&(i, _)| feature_of(i).clone())
            .collect();
        let support_labels: Vec<usize> = ep.support.iter().map(|&(_, c)| c).collect();
        let bank = bank_from_features(&support, &support_labels, names.clone())?;
        let queries: Vec<GlobalFeature> = ep
            .query
            .iter()
            .map(|&(i, _)| feature_of(i).clone())
            .collect();
        let query_labels: Vec<usize> = ep.query.iter().map(|&(_, c)| c).collect();
        per_run.push(confusion_for(pool, &queries, &query_labels, &bank, gamma)?.accuracy());
    }
    let (mean, std) = mean_std(&per_run);
    Ok(FewShotReport {
        way,
        shot,
        queries_per_class,
        per_run,
        mean,
        std,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
