//! Tabular ingestion: CSV loading, mean imputation, min-max scaling,
//! k-fold planning and a synthetic two-cluster generator.
//!
//! Labels follow the convention `0 = failed/bankrupt`, `1 = healthy`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Cell values treated as missing.
pub const MISSING_MARKERS: [&str; 2] = ["", "NA"];

/// Raw rows as read from disk, possibly with missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "raw table labels",
                expected: rows.len(),
                found: labels.len(),
            });
        }
        for row in &rows {
            if row.len() != column_names.len() {
                return Err(Error::DimensionMismatch {
                    context: "raw table row",
                    expected: column_names.len(),
                    found: row.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(
                "labels",
                format!("label {bad} is not 0 or 1"),
            ));
        }
        Ok(Self {
            column_names,
            rows,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Option::is_none)
    }

    /// Mean of the non-missing values of every column.
    pub fn column_means(&self) -> Result<Vec<f64>> {
        (0..self.n_columns())
            .map(|c| {
                let (sum, count) = self
                    .rows
                    .iter()
                    .filter_map(|r| r[c])
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if count == 0 {
                    Err(Error::AllMissingColumn(self.column_names[c].clone()))
                } else {
                    Ok(sum / count as f64)
                }
            })
            .collect()
    }
}

/// Per-column affine map `x -> (x - min) / (max - min)`.
///
/// A column whose range is zero maps every value to `0.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn identity() -> Self {
        Self { min: 0.0, max: 1.0 }
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn is_constant(&self) -> bool {
        self.span() == 0.0
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.min) / self.span()
        }
    }

    pub fn unscale(&self, y: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            y * self.span() + self.min
        }
    }

    /// The single map equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &ColumnRange) -> ColumnRange {
        if self.is_constant() || next.is_constant() {
            return ColumnRange {
                min: self.unscale(next.min),
                max: self.unscale(next.min),
            };
        }
        let min = self.min + next.min * self.span();
        ColumnRange {
            min,
            max: min + next.span() * self.span(),
        }
    }
}

/// Dense, fully observed feature matrix with binary labels.
///
/// `normalization` records, per column, the map that took the original
/// (raw) values to the values stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    column_names: Vec<String>,
    normalization: Vec<ColumnRange>,
}

impl Dataset {
    /// Builds a dataset from row-major values without rescaling; the
    /// recorded normalization is the identity.
    pub fn from_rows(
        column_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n_features = column_names.len();
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    context: "dataset row",
                    expected: n_features,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels", "labels must be 0 or 1"));
        }
        Ok(Self {
            values,
            n_features,
            labels,
            normalization: vec![ColumnRange::identity(); n_features],
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty slice with zero width would panic
        self.values
            .chunks_exact(self.n_features.max(1))
            .take(self.labels.len())
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn normalization(&self) -> &[ColumnRange] {
        &self.normalization
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            values,
            n_features: self.n_features,
            labels,
            column_names: self.column_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Keeps only the named columns, in the order given.
    pub fn with_columns(&self, names: &[String]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::UnknownColumn {
                        path: "<dataset>".into(),
                        column: n.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.rows() {
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(Dataset {
            values,
            n_features: idx.len(),
            labels: self.labels.clone(),
            column_names: names.to_vec(),
            normalization: idx.iter().map(|&c| self.normalization[c]).collect(),
        })
    }

    /// Fits a min-max scaler on this dataset's current values.
    pub fn fit_scaler(&self) -> Scaler {
        let ranges = (0..self.n_features)
            .map(|c| {
                let (min, max) = self
                    .rows()
                    .map(|r| r[c])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                ColumnRange { min, max }
            })
            .collect();
        Scaler { ranges }
    }

    /// The same values with the recorded normalization reset to the
    /// identity, i.e. the current values become the reference units.
    pub fn as_raw(&self) -> Dataset {
        Dataset {
            normalization: vec![ColumnRange::identity(); self.n_features],
            ..self.clone()
        }
    }

    /// Values mapped back through the recorded normalization.
    pub fn denormalized_row(&self, i: usize) -> Vec<f64> {
        self.row(i)
            .iter()
            .zip(&self.normalization)
            .map(|(&y, r)| r.unscale(y))
            .collect()
    }
}

/// Min-max scaler fitted on one dataset and reusable on others.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub ranges: Vec<ColumnRange>,
}

impl Scaler {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features != self.ranges.len() {
            return Err(Error::DimensionMismatch {
                context: "scaler width",
                expected: self.ranges.len(),
                found: data.n_features,
            });
        }
        let mut values = data.values.clone();
        if data.n_features > 0 {
            for row in values.chunks_exact_mut(data.n_features) {
                for (v, r) in row.iter_mut().zip(&self.ranges) {
                    *v = r.scale(*v);
                }
            }
        }
        Ok(Dataset {
            values,
            n_features: data.n_features,
            labels: data.labels.clone(),
            column_names: data.column_names.clone(),
            normalization: data
                .normalization
                .iter()
                .zip(&self.ranges)
                .map(|(before, now)| before.then(now))
                .collect(),
        })
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.ranges)
            .map(|(&x, r)| r.scale(x))
            .collect()
    }
}

/// Assignment of every row index to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

fn parse_cell(raw: &str) -> Option<&str> {
    let t = raw.trim();
    if MISSING_MARKERS.contains(&t) {
        None
    } else {
        Some(t)
    }
}

/// Reads a comma-separated file with a header row.
///
/// An empty `feature_columns` selects every column other than the label.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    feature_columns: &[String],
) -> Result<RawTable> {
    let (column_names, rows, labels) =
        read_table(path.as_ref(), label_column, feature_columns, true)?;
    Ok(RawTable {
        column_names,
        rows,
        labels: labels.expect("labels are required"),
    })
}

/// Feature cells of a CSV that may or may not carry the label column.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Present when the file has the label column.
    pub labels: Option<Vec<u8>>,
}

/// Like [`load_csv`], but a missing label column is not an error.
pub fn load_csv_maybe_labeled(
    path: impl AsRef<Path>,
    label_column: &str,
    feature_columns: &[String],
) -> Result<UnlabeledTable> {
    let (column_names, rows, labels) =
        read_table(path.as_ref(), label_column, feature_columns, false)?;
    Ok(UnlabeledTable {
        column_names,
        rows,
        labels,
    })
}

type Table = (Vec<String>, Vec<Vec<Option<f64>>>, Option<Vec<u8>>);

fn read_table(
    path: &Path,
    label_column: &str,
    feature_columns: &[String],
    require_label: bool,
) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let label_idx = match find(label_column) {
        Ok(i) => Some(i),
        Err(e) if require_label => return Err(e),
        Err(_) => None,
    };
    let names: Vec<String> = if feature_columns.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != label_idx)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        feature_columns.to_vec()
    };
    let feature_idx = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        if let Some(li) = label_idx {
            let label_raw = record[li].trim();
            match label_raw.parse::<u8>() {
                Ok(l @ (0 | 1)) => labels.push(l),
                _ => {
                    return Err(Error::BadLabel {
                        path: path.to_path_buf(),
                        line,
                        value: label_raw.to_string(),
                    })
                }
            }
        }
        let row = feature_idx
            .iter()
            .zip(&names)
            .map(|(&c, name)| match parse_cell(&record[c]) {
                None => Ok(None),
                Some(s) => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::BadNumber {
                        path: path.to_path_buf(),
                        line,
                        column: name.clone(),
                        value: s.to_string(),
                    }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((names, rows, label_idx.map(|_| labels)))
}

/// Replaces every missing cell with its column's mean.
pub fn impute_mean(table: &RawTable) -> Result<RawTable> {
    let means = table.column_means()?;
    impute_with(table, &means)
}

/// Replaces missing cells with the supplied per-column fill values.
pub fn impute_with(table: &RawTable, fill: &[f64]) -> Result<RawTable> {
    if fill.len() != table.n_columns() {
        return Err(Error::DimensionMismatch {
            context: "imputation fill values",
            expected: table.n_columns(),
            found: fill.len(),
        });
    }
    let rows = table
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(fill)
                .map(|(v, &m)| Some(v.unwrap_or(m)))
                .collect()
        })
        .collect();
    Ok(RawTable {
        column_names: table.column_names.clone(),
        rows,
        labels: table.labels.clone(),
    })
}

/// Removes every row with at least one missing cell.
pub fn drop_incomplete(table: &RawTable) -> RawTable {
    let (rows, labels) = table
        .rows
        .iter()
        .zip(&table.labels)
        .filter(|(r, _)| r.iter().all(Option::is_some))
        .map(|(r, &l)| (r.clone(), l))
        .unzip();
    RawTable {
        column_names: table.column_names.clone(),
        rows,
        labels,
    }
}

/// Min-max scales every column of a fully observed table into `[0, 1]`.
pub fn normalize_minmax(table: &RawTable) -> Result<Dataset> {
    let mut dense = Vec::with_capacity(table.n_rows());
    for row in &table.rows {
        let mut out = Vec::with_capacity(row.len());
        for (c, v) in row.iter().enumerate() {
            match v {
                Some(v) => out.push(*v),
                None => return Err(Error::MissingValues(table.column_names[c].clone())),
            }
        }
        dense.push(out);
    }
    let raw = Dataset::from_rows(table.column_names.clone(), &dense, table.labels.clone())?;
    raw.fit_scaler().apply(&raw)
}

/// Randomly assigns `n_rows` indices to `k` folds of near-equal size.
pub fn make_folds(n_rows: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if k > n_rows {
        return Err(Error::invalid(
            "k",
            format!("{k} folds exceed {n_rows} rows"),
        ));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

/// Splits into (train, test) with `test_fold` held out. Row order is kept.
pub fn split(dataset: &Dataset, plan: &FoldPlan, test_fold: usize) -> Result<(Dataset, Dataset)> {
    if plan.k < 2 {
        return Err(Error::invalid(
            "k",
            "cross validation needs at least 2 folds",
        ));
    }
    if test_fold >= plan.k {
        return Err(Error::invalid(
            "test_fold",
            format!("fold {test_fold} out of range for k = {}", plan.k),
        ));
    }
    if plan.assignments.len() != dataset.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "fold plan rows",
            expected: dataset.n_rows(),
            found: plan.assignments.len(),
        });
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..dataset.n_rows()).partition(|&i| plan.assignments[i] == test_fold);
    Ok((dataset.select(&train), dataset.select(&test)))
}

/// Two unit-variance Gaussian clusters: class 0 centred at the origin,
/// class 1 at `(separation, ..., separation)`. Min-max normalized.
pub fn generate_synthetic(
    n_per_class: usize,
    n_features: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class", "must be at least 1"));
    }
    if n_features == 0 {
        return Err(Error::invalid("n_features", "must be at least 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid(
            "separation",
            "must be finite and non-negative",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for label in [0u8, 1] {
        let centre = if label == 0 { 0.0 } else { separation };
        for _ in 0..n_per_class {
            let row: Vec<f64> = (0..n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    centre + z
                })
                .collect();
            rows.push(row);
            labels.push(label);
        }
    }
    let names = (0..n_features).map(|i| format!("x{i}")).collect();
    let raw = Dataset::from_rows(names, &rows, labels)?;
    raw.fit_scaler().apply(&raw)
}

/// Writes a dataset as CSV with its column names and a trailing `label` column.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let wrap = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut header = dataset.column_names.clone();
    header.push("label".into());
    w.write_record(&header).map_err(wrap)?;
    for (row, label) in dataset.rows().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
