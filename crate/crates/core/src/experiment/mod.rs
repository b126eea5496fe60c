//! End-to-end experiments: load a data set, cross-validate each training
//! algorithm and write traces, reports and a model checkpoint.

pub mod checkpoint;
pub mod config;
pub mod reports;

use std::path::{Path, PathBuf};

pub use checkpoint::{evaluate_file, Checkpoint, Evaluation, FeatureScaling};
pub use config::{parse_config, validate_config, DataSource, ExperimentConfig, MissingMode};
pub use reports::{read_report, read_summary, read_trace, ReportRow, SummaryRow, TraceRecord};

use crate::dataset::{
    drop_incomplete, generate_synthetic, impute_with, load_csv, make_folds, normalize_minmax,
    Dataset,
};
use crate::error::{Error, Result};
use crate::metrics::{cross_validate, CrossValidation};
use crate::trainer::Algorithm;

/// A data set ready for cross validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub label_column: String,
    /// Per-column value used for missing cells, in original units.
    pub fill: Vec<f64>,
}

/// Loads the configured source. CSV data is imputed (or filtered) and
/// min-max scaled; synthetic data keeps its generated values as the
/// reference units.
pub fn load_dataset(config: &ExperimentConfig) -> Result<PreparedData> {
    let selected = config.features.clone().unwrap_or_default();
    match &config.data {
        DataSource::Csv { path, label_column } => {
            let table = load_csv(path, label_column, &selected)?;
            let fill = table.column_means()?;
            let complete = match config.missing {
                MissingMode::Impute => impute_with(&table, &fill)?,
                MissingMode::Drop => drop_incomplete(&table),
            };
            if complete.n_rows() == 0 {
                return Err(Error::EmptyDataset);
            }
            Ok(PreparedData {
                dataset: normalize_minmax(&complete)?,
                label_column: label_column.clone(),
                fill,
            })
        }
        DataSource::Synthetic {
            rows,
            n_features,
            separation,
            seed,
        } => {
            let mut dataset =
                generate_synthetic(rows / 2, *n_features, *separation, *seed)?.as_raw();
            if !selected.is_empty() {
                dataset = dataset.with_columns(&selected)?;
            }
            let n = dataset.n_rows() as f64;
            let fill = (0..dataset.n_features())
                .map(|c| dataset.rows().map(|r| r[c]).sum::<f64>() / n)
                .collect();
            Ok(PreparedData {
                dataset,
                label_column: "label".into(),
                fill,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub cross_validation: CrossValidation,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub n_rows: usize,
    pub n_features: usize,
    pub results: Vec<AlgorithmResult>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn best(&self) -> Option<&AlgorithmResult> {
        let i = self.summary.iter().position(|r| r.best)?;
        self.results.get(i)
    }
}

/// Checkpoint of a fold's network with the scaling that fold was trained on.
pub fn fold_checkpoint(
    data: &PreparedData,
    cv: &CrossValidation,
    fold: usize,
) -> Result<Checkpoint> {
    let f = cv
        .folds
        .get(fold)
        .ok_or_else(|| Error::invalid("fold", format!("{fold} out of range")))?;
    let features = data
        .dataset
        .column_names()
        .iter()
        .zip(&f.normalization)
        .zip(&data.fill)
        .map(|((name, range), &fill)| FeatureScaling {
            name: name.clone(),
            range: *range,
            fill,
        })
        .collect();
    Checkpoint::new(data.label_column.clone(), features, f.model.weights.clone())
}

/// Cross-validates every configured algorithm on the same folds and
/// writes the result files into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let data = load_dataset(config)?;
    let plan = make_folds(data.dataset.n_rows(), config.k_folds, config.seed)?;

    let mut results = Vec::with_capacity(config.algorithms.len());
    for &algorithm in &config.algorithms {
        let trainer = config.trainer.clone().with_algorithm(algorithm);
        let cv = cross_validate(&data.dataset, &plan, &trainer, config.seed)?;
        let checkpoint = fold_checkpoint(&data, &cv, cv.best_fold().fold)?;
        results.push(AlgorithmResult {
            algorithm,
            cross_validation: cv,
            checkpoint,
        });
    }
    let pairs: Vec<(Algorithm, CrossValidation)> = results
        .iter()
        .map(|r| (r.algorithm, r.cross_validation.clone()))
        .collect();
    let summary = reports::summary_rows(&pairs);

    let mut staged: Vec<(String, String)> = Vec::new();
    for r in &results {
        let key = r.algorithm.key();
        let cv = &r.cross_validation;
        staged.push((
            format!("trace_{key}.csv"),
            reports::trace_csv(r.algorithm, cv),
        ));
        staged.push((format!("report_{key}.csv"), reports::report_csv(cv)));
        staged.push((
            format!("report_{key}.txt"),
            reports::report_text(r.algorithm, cv),
        ));
        staged.push((format!("model_{key}.csv"), r.checkpoint.to_csv()));
    }
    staged.push(("summary.csv".into(), reports::summary_csv(&summary)));
    staged.push((
        "summary.txt".into(),
        reports::summary_text(&summary, data.dataset.n_features()),
    ));
    let files = publish(&config.output_dir, &staged)?;

    Ok(ExperimentOutcome {
        n_rows: data.dataset.n_rows(),
        n_features: data.dataset.n_features(),
        results,
        summary,
        files,
    })
}

/// Writes every file into a scratch directory inside `dir` and moves them
/// into `dir` only once all of them were written.
fn publish(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scratch = tempfile::Builder::new()
        .prefix(".staging")
        .tempdir_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    for (name, contents) in files {
        let path = scratch.path().join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    let mut out = Vec::with_capacity(files.len());
    for (name, _) in files {
        let target = dir.join(name);
        std::fs::rename(scratch.path().join(name), &target).map_err(|e| Error::io(&target, e))?;
        out.push(target);
    }
    Ok(out)
}
