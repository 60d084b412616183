//! Similarity-cache classifier.
//!
//! A bank stores the unit-length descriptors of the training clouds and their
//! one-hot labels. A query is scored against every bank row by cosine
//! similarity `s`, each row contributes `exp(-gamma * (1 - s))` to its class,
//! and the class with the largest total wins.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::GlobalFeature;
use crate::error::{Error, Result};
use crate::matrix::{dot, l2_norm, Matrix};

pub const DEFAULT_GAMMA: f64 = 100.0;

/// Candidate scales tried by [`select_gamma_loo`] from the CLI.
pub const DEFAULT_GAMMA_CANDIDATES: [f64; 7] = [1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0];

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    features: Matrix,
    labels: Vec<usize>,
    one_hot: Matrix,
    class_names: Vec<String>,
    fingerprint: u64,
}

impl FeatureBank {
    /// Assembles a bank from already normalized rows, e.g. ones read back
    /// from disk.
    pub fn from_parts(
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        fingerprint: u64,
    ) -> Result<Self> {
        let m = features.rows();
        let c = class_names.len();
        if m == 0 {
            return Err(Error::InvalidInput("feature bank has no rows".into()));
        }
        if c < 2 {
            return Err(Error::InvalidInput(format!(
                "feature bank needs at least 2 classes, got {c}"
            )));
        }
        if labels.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{m} feature rows but {} labels",
                labels.len()
            )));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l >= c) {
            return Err(Error::InvalidInput(format!(
                "row {i} has label {l}, outside [0, {c})"
            )));
        }
        for (i, row) in features.iter_rows().enumerate() {
            let n = l2_norm(row);
            if n.is_nan() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "bank row {i} has norm {n}, expected 1"
                )));
            }
        }
        let mut one_hot = Matrix::zeros(m, c);
        for (i, &l) in labels.iter().enumerate() {
            one_hot.row_mut(i)[l] = 1.0;
        }
        Ok(Self {
            features,
            labels,
            one_hot,
            class_names,
            fingerprint,
        })
    }

    /// Replaces the generated `class_<i>` names.
    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.class_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} class names for {} classes",
                names.len(),
                self.class_names.len()
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// `M x dim`, unit rows.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// `M x C` one-hot label matrix.
    pub fn one_hot(&self) -> &Matrix {
        &self.one_hot
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Stacks encoded training clouds, in order, into a bank with one-hot labels.
pub fn build_bank<'a, I>(encoded: I, num_classes: usize) -> Result<FeatureBank>
where
    I: IntoIterator<Item = (&'a GlobalFeature, usize)>,
{
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    let mut fingerprint = None;
    for (i, (feature, label)) in encoded.into_iter().enumerate() {
        let d = *dim.get_or_insert(feature.len());
        if feature.len() != d || d == 0 {
            return Err(Error::ShapeMismatch(format!(
                "sample {i} has {} values, expected {d}",
                feature.len()
            )));
        }
        let fp = *fingerprint.get_or_insert(feature.config_fingerprint);
        if fp != feature.config_fingerprint {
            return Err(Error::InvalidInput(format!(
                "sample {i} was encoded under a different configuration"
            )));
        }
        if label >= num_classes {
            return Err(Error::InvalidInput(format!(
                "sample {i} has label {label}, outside [0, {num_classes})"
            )));
        }
        let start = data.len();
        data.extend_from_slice(&feature.values);
        normalize(&mut data[start..]);
        labels.push(label);
    }
    let Some(dim) = dim else {
        return Err(Error::InvalidInput(
            "cannot build a bank from zero samples".into(),
        ));
    };
    let features = Matrix::from_vec(labels.len(), dim, data)?;
    let names = (0..num_classes).map(|c| format!("class_{c}")).collect();
    FeatureBank::from_parts(features, labels, names, fingerprint.unwrap_or_default())
}

fn normalize(v: &mut [f64]) {
    let n = l2_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankWarning {
    /// The query was encoded under a different configuration than the bank.
    ConfigMismatch { bank: u64, query: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub logits: Vec<f64>,
    /// Softmax of `logits`.
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
    /// Largest cosine similarity against any bank row.
    pub top_similarity: f64,
    pub warning: Option<BankWarning>,
}

impl ClassificationResult {
    pub fn from_logits(logits: Vec<f64>, top_similarity: f64) -> Self {
        let probabilities = softmax(&logits);
        let predicted_class = argmax(&logits);
        Self {
            logits,
            probabilities,
            predicted_class,
            top_similarity,
            warning: None,
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let exps: Vec<f64> = values.iter().map(|v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// The decided class of a result (argmax of the logits, lowest index on ties).
pub fn predict(result: &ClassificationResult) -> usize {
    result.predicted_class
}

pub fn classify(
    query: &GlobalFeature,
    bank: &FeatureBank,
    gamma: f64,
) -> Result<ClassificationResult> {
    let mut result = classify_values(&query.values, bank, gamma)?;
    if query.config_fingerprint != bank.fingerprint {
        result.warning = Some(BankWarning::ConfigMismatch {
            bank: bank.fingerprint,
            query: query.config_fingerprint,
        });
    }
    Ok(result)
}

/// [`classify`] on a bare descriptor; no configuration check is possible.
pub fn classify_values(
    query: &[f64],
    bank: &FeatureBank,
    gamma: f64,
) -> Result<ClassificationResult> {
    check_gamma(gamma)?;
    if query.len() != bank.dim() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} values, bank rows have {}",
            query.len(),
            bank.dim()
        )));
    }
    let mut q = query.to_vec();
    normalize(&mut q);
    let sims: Vec<f64> = bank.features.iter_rows().map(|r| dot(&q, r)).collect();
    Ok(score(&sims, None, bank, gamma))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "gamma must be positive and finite, got {gamma}"
        )))
    }
}

/// Turns similarities into a result, skipping bank row `exclude` if given.
fn score(
    sims: &[f64],
    exclude: Option<usize>,
    bank: &FeatureBank,
    gamma: f64,
) -> ClassificationResult {
    let c = bank.num_classes();
    let mut logits = vec![0.0; c];
    let mut top = f64::NEG_INFINITY;
    for (m, &s) in sims.iter().enumerate() {
        if Some(m) == exclude {
            continue;
        }
        top = top.max(s);
        let w = libm::exp(-gamma * (1.0 - s));
        for (y, l) in logits.iter_mut().zip(bank.one_hot.row(m)) {
            *y += w * l;
        }
    }
    let mut result = ClassificationResult::from_logits(logits, top);
    if result.logits.iter().all(|y| *y == 0.0) {
        // Every weight underflowed. Rescaling all weights by exp(gamma * (1 - top))
        // leaves the argmax unchanged and brings the best row back to 1.
        let mut shifted = vec![0.0; c];
        for (m, &s) in sims.iter().enumerate() {
            if Some(m) == exclude {
                continue;
            }
            let w = libm::exp(-gamma * (top - s));
            for (y, l) in shifted.iter_mut().zip(bank.one_hot.row(m)) {
                *y += w * l;
            }
        }
        result.predicted_class = argmax(&shifted);
    }
    result
}

/// Outcome of [`select_gamma_loo`].
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSelection {
    pub gamma: f64,
    pub loo_accuracy: f64,
    /// `(gamma, accuracy)` for every candidate, in candidate order.
    pub per_candidate: Vec<(f64, f64)>,
}

/// Predictions for bank row `row` classified against the rest of the bank,
/// one per candidate gamma.
pub fn loo_predictions(bank: &FeatureBank, row: usize, candidates: &[f64]) -> Vec<usize> {
    let q = bank.features.row(row);
    let sims: Vec<f64> = bank.features.iter_rows().map(|r| dot(q, r)).collect();
    candidates
        .iter()
        .map(|&g| score(&sims, Some(row), bank, g).predicted_class)
        .collect()
}

/// Picks gamma by leave-one-out accuracy over the bank itself.
pub fn select_gamma_loo(bank: &FeatureBank, candidates: &[f64]) -> Result<GammaSelection> {
    let correct = loo_correct_counts(
        bank,
        candidates,
        (0..bank.len()).map(|i| loo_predictions(bank, i, candidates)),
    )?;
    Ok(pick_gamma(bank.len(), candidates, &correct))
}

/// Validates inputs and tallies correct predictions per candidate. The row
/// predictions must come in bank order.
pub fn loo_correct_counts<I>(
    bank: &FeatureBank,
    candidates: &[f64],
    predictions: I,
) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    if bank.len() < 2 {
        return Err(Error::InvalidInput(
            "leave-one-out needs a bank of at least 2 rows".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no gamma candidates given".into()));
    }
    for &g in candidates {
        check_gamma(g)?;
    }
    let mut correct = vec![0usize; candidates.len()];
    for (row, preds) in predictions.into_iter().enumerate() {
        for (c, p) in correct.iter_mut().zip(preds) {
            if p == bank.labels[row] {
                *c += 1;
            }
        }
    }
    Ok(correct)
}

/// Best candidate by accuracy; ties go to the smallest gamma.
pub fn pick_gamma(rows: usize, candidates: &[f64], correct: &[usize]) -> GammaSelection {
    let per_candidate: Vec<(f64, f64)> = candidates
        .iter()
        .zip(correct)
        .map(|(&g, &c)| (g, c as f64 / rows as f64))
        .collect();
    let mut best = per_candidate[0];
    for &(g, acc) in &per_candidate[1..] {
        if acc > best.1 || (acc == best.1 && g < best.0) {
            best = (g, acc);
        }
    }
    GammaSelection {
        gamma: best.0,
        loo_accuracy: best.1,
        per_candidate,
    }
}
