//! Trained-network checkpoints.
//!
//! A checkpoint is a CSV file whose first field tags each record:
//!
//! ```text
//! record,name,min,max,fill
//! label,label,,,
//! feature,x0,-3.1,5.2,0.4
//! feature,x1,-2.9,6.0,1.1
//! weights,2,5,1,0.13,-1.2,...
//! ```
//!
//! `feature` records hold, in the original units of the data file, the
//! min-max range that maps a value onto the network input and the value
//! substituted for a missing cell. The `weights` record is the network's
//! flat weight line.

use std::path::Path;

use crate::dataset::{load_csv_maybe_labeled, ColumnRange};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, confusion, MetricReport};
use crate::mlp::{forward, threshold, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling {
    pub name: String,
    pub range: ColumnRange,
    pub fill: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub label_column: String,
    pub features: Vec<FeatureScaling>,
    pub weights: WeightVector,
}

const HEADER: [&str; 5] = ["record", "name", "min", "max", "fill"];

impl Checkpoint {
    pub fn new(
        label_column: String,
        features: Vec<FeatureScaling>,
        weights: WeightVector,
    ) -> Result<Self> {
        if features.len() != weights.topology().n_inputs() {
            return Err(Error::DimensionMismatch {
                context: "checkpoint features",
                expected: weights.topology().n_inputs(),
                found: features.len(),
            });
        }
        Ok(Self {
            label_column,
            features,
            weights,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        out.push_str(&format!("label,{},,,\n", csv_field(&self.label_column)));
        for f in &self.features {
            out.push_str(&format!(
                "feature,{},{},{},{}\n",
                csv_field(&f.name),
                f.range.min,
                f.range.max,
                f.fill
            ));
        }
        out.push_str("weights,");
        out.push_str(&self.weights.to_csv_line());
        out.push('\n');
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != HEADER {
            return Err(bad("unexpected header".into()));
        }
        let mut label = None;
        let mut features = Vec::new();
        let mut weights = None;
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad number in record {:?}", rec.get(0))))
            };
            match rec.get(0) {
                Some("label") => label = rec.get(1).map(str::to_string),
                Some("feature") => features.push(FeatureScaling {
                    name: rec.get(1).unwrap_or_default().to_string(),
                    range: ColumnRange {
                        min: num(2)?,
                        max: num(3)?,
                    },
                    fill: num(4)?,
                }),
                Some("weights") => {
                    let line = rec.iter().skip(1).collect::<Vec<_>>().join(",");
                    weights =
                        Some(WeightVector::from_csv_line(&line).map_err(|e| bad(e.to_string()))?);
                }
                other => return Err(bad(format!("unknown record {other:?}"))),
            }
        }
        let label = label.ok_or_else(|| bad("missing label record".into()))?;
        let weights = weights.ok_or_else(|| bad("missing weights record".into()))?;
        Self::new(label, features, weights).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Network input for one row in original units; `None` cells are filled.
    pub fn prepare(&self, row: &[Option<f64>]) -> Vec<f64> {
        row.iter()
            .zip(&self.features)
            .map(|(v, f)| f.range.scale(v.unwrap_or(f.fill)))
            .collect()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub probabilities: Vec<f64>,
    pub predictions: Vec<u8>,
    pub labels: Option<Vec<u8>>,
    pub report: Option<MetricReport>,
}

/// Classifies every row of a CSV file with a checkpoint. Metrics are
/// computed when the file carries the label column.
pub fn evaluate_file(checkpoint: &Checkpoint, data: impl AsRef<Path>) -> Result<Evaluation> {
    let names: Vec<String> = checkpoint.features.iter().map(|f| f.name.clone()).collect();
    let table = load_csv_maybe_labeled(data, &checkpoint.label_column, &names)?;
    let topology = checkpoint.weights.topology();
    let mut probabilities = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        probabilities.push(forward(
            topology,
            &checkpoint.weights,
            &checkpoint.prepare(row),
        )?);
    }
    let predictions: Vec<u8> = probabilities.iter().map(|&p| threshold(p)).collect();
    let report = match &table.labels {
        Some(labels) if !labels.is_empty() => {
            Some(compute_metrics(&confusion(&predictions, labels)?)?)
        }
        _ => None,
    };
    Ok(Evaluation {
        probabilities,
        predictions,
        labels: table.labels,
        report,
    })
}
