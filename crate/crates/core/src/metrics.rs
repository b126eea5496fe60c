//! Confusion matrices, derived classification measures and k-fold
//! cross validation.
//!
//! Class 1 (healthy) is the positive class and class 0 (failed) the negative
//! one, so sensitivity is the healthy-class recall and specificity the
//! failed-class recall.

use rayon::prelude::*;

use crate::dataset::{split, ColumnRange, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::mlp::{forward_raw, threshold};
use crate::trainer::{derive_seed, train, TrainedModel, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same counts seen with class 0 as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "predictions vs labels",
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => return Err(Error::invalid("labels", "values must be 0 or 1")),
        }
    }
    Ok(cm)
}

/// Which ratios had a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub specificity: bool,
    pub negative_precision: bool,
    pub f_measure: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision
            || self.recall
            || self.specificity
            || self.negative_precision
            || self.f_measure
    }

    fn union(&self, o: &Self) -> Self {
        Self {
            precision: self.precision || o.precision,
            recall: self.recall || o.recall,
            specificity: self.specificity || o.specificity,
            negative_precision: self.negative_precision || o.negative_precision,
            f_measure: self.f_measure || o.f_measure,
        }
    }

    /// Names of the flagged measures joined by `|`, empty when none.
    pub fn describe(&self) -> String {
        [
            (self.precision, "precision"),
            (self.recall, "recall"),
            (self.specificity, "specificity"),
            (self.negative_precision, "negative_precision"),
            (self.f_measure, "f_measure"),
        ]
        .iter()
        .filter(|(f, _)| *f)
        .map(|(_, n)| *n)
        .collect::<Vec<_>>()
        .join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub accuracy: f64,
    /// Precision of the healthy class.
    pub precision: f64,
    /// Sensitivity: recall of the healthy class.
    pub recall: f64,
    /// Recall of the failed class.
    pub specificity: f64,
    pub f_measure: f64,
    /// Precision of the failed class.
    pub negative_precision: f64,
    pub degenerate: Degenerate,
}

impl MetricReport {
    pub fn recall_bankrupt(&self) -> f64 {
        self.specificity
    }

    pub fn recall_healthy(&self) -> f64 {
        self.recall
    }

    pub fn precision_bankrupt(&self) -> f64 {
        self.negative_precision
    }

    pub fn precision_healthy(&self) -> f64 {
        self.precision
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean; `None` when both inputs are zero.
pub fn f_measure(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let (precision, dp) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, dr) = ratio(cm.tp, cm.tp + cm.fn_);
    let (specificity, ds) = ratio(cm.tn, cm.tn + cm.fp);
    let (negative_precision, dn) = ratio(cm.tn, cm.tn + cm.fn_);
    let (f, df) = match f_measure(precision, recall) {
        Some(f) => (f, false),
        None => (0.0, true),
    };
    Ok(MetricReport {
        accuracy,
        precision,
        recall,
        specificity,
        f_measure: f,
        negative_precision,
        degenerate: Degenerate {
            precision: dp,
            recall: dr,
            specificity: ds,
            negative_precision: dn,
            f_measure: df,
        },
    })
}

/// Field-wise arithmetic mean; a flag is set if any input had it.
pub fn mean_report(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        accuracy: mean(|r| r.accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        specificity: mean(|r| r.specificity),
        f_measure: mean(|r| r.f_measure),
        negative_precision: mean(|r| r.negative_precision),
        degenerate: reports
            .iter()
            .fold(Degenerate::default(), |acc, r| acc.union(&r.degenerate)),
    })
}

/// Class predictions of a trained model.
pub fn predict(model: &TrainedModel, data: &Dataset) -> Result<Vec<u8>> {
    if data.n_features() != model.topology.n_inputs() {
        return Err(Error::DimensionMismatch {
            context: "dataset width",
            expected: model.topology.n_inputs(),
            found: data.n_features(),
        });
    }
    Ok(data
        .rows()
        .map(|x| threshold(forward_raw(model.topology, model.weights.values(), x)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub model: TrainedModel,
    pub matrix: ConfusionMatrix,
    pub report: MetricReport,
    /// Map from the original feature values to the model's inputs, fitted
    /// on this fold's training part.
    pub normalization: Vec<ColumnRange>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Mean of the per-fold measures.
    pub overall: MetricReport,
    /// Measures of the summed confusion matrix.
    pub pooled: MetricReport,
}

impl CrossValidation {
    /// Most frequent selected hidden count; the smallest wins ties.
    pub fn modal_hidden(&self) -> usize {
        let mut counts = std::collections::BTreeMap::new();
        for f in &self.folds {
            *counts.entry(f.model.topology.n_hidden()).or_insert(0usize) += 1;
        }
        counts
            .iter()
            .fold(
                (0, 0),
                |(bh, bc), (&h, &c)| if c > bc { (h, c) } else { (bh, bc) },
            )
            .0
    }

    /// Fold with the highest test accuracy (lowest index on ties).
    pub fn best_fold(&self) -> &FoldResult {
        self.folds
            .iter()
            .fold(None::<&FoldResult>, |acc, f| match acc {
                Some(b) if b.report.accuracy >= f.report.accuracy => Some(b),
                _ => Some(f),
            })
            .expect("cross validation has at least two folds")
    }
}

/// Trains on each fold's complement (rescaled with parameters fitted on
/// that complement only) and scores the held-out fold.
pub fn cross_validate(
    dataset: &Dataset,
    plan: &FoldPlan,
    config: &TrainerConfig,
    seed: u64,
) -> Result<CrossValidation> {
    if plan.assignments.len() != dataset.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "fold plan rows",
            expected: dataset.n_rows(),
            found: plan.assignments.len(),
        });
    }
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|fold| -> Result<FoldResult> {
            let (train_raw, test_raw) = split(dataset, plan, fold)?;
            let scaler = train_raw.fit_scaler();
            let train_set = scaler.apply(&train_raw)?;
            let test_set = scaler.apply(&test_raw)?;
            let model = train(&train_set, config, derive_seed(seed, &[fold as u64]))?;
            let predictions = predict(&model, &test_set)?;
            let matrix = confusion(&predictions, test_set.labels())?;
            Ok(FoldResult {
                fold,
                report: compute_metrics(&matrix)?,
                matrix,
                normalization: train_set.normalization().to_vec(),
                train_rows: train_set.n_rows(),
                test_rows: test_set.n_rows(),
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = mean_report(&folds.iter().map(|f| f.report).collect::<Vec<_>>())?;
    let pooled_cm = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.merge(&f.matrix));
    Ok(CrossValidation {
        pooled: compute_metrics(&pooled_cm)?,
        folds,
        overall,
    })
}
