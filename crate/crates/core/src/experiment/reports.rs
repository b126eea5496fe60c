//! CSV and plain-text report files, with readers for the CSV ones.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, CrossValidation, MetricReport};
use crate::trainer::Algorithm;

pub const TRACE_HEADER: [&str; 6] = [
    "algorithm",
    "fold",
    "outer_iter",
    "inner_iter",
    "hidden_count",
    "best_mse",
];

pub const REPORT_HEADER: [&str; 17] = [
    "scope",
    "hidden_count",
    "train_mse",
    "tp",
    "tn",
    "fp",
    "fn",
    "accuracy",
    "precision",
    "sensitivity",
    "specificity",
    "f_measure",
    "recall_bankrupt",
    "recall_healthy",
    "precision_bankrupt",
    "precision_healthy",
    "degenerate",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "algorithm",
    "model",
    "accuracy",
    "precision",
    "sensitivity",
    "specificity",
    "f_measure",
    "recall_bankrupt",
    "recall_healthy",
    "pooled_accuracy",
    "modal_hidden",
    "best",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub algorithm: Algorithm,
    pub fold: usize,
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub hidden_count: usize,
    pub best_mse: f64,
}

/// One line of a per-algorithm report: a fold, the fold mean or the pooled matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scope: String,
    pub hidden_count: Option<usize>,
    pub train_mse: Option<f64>,
    pub matrix: Option<ConfusionMatrix>,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub overall: MetricReport,
    pub pooled_accuracy: f64,
    pub modal_hidden: usize,
    pub best: bool,
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn trace_csv(algorithm: Algorithm, cv: &CrossValidation) -> String {
    let rows = cv.folds.iter().flat_map(|f| {
        f.model.trace.iter().map(move |t| {
            vec![
                algorithm.key().to_string(),
                f.fold.to_string(),
                t.outer_iter.to_string(),
                t.inner_iter.to_string(),
                t.hidden_count.to_string(),
                t.best_mse.to_string(),
            ]
        })
    });
    to_csv(&TRACE_HEADER, rows)
}

fn metric_fields(m: &MetricReport) -> Vec<String> {
    [
        m.accuracy,
        m.precision,
        m.recall,
        m.specificity,
        m.f_measure,
        m.recall_bankrupt(),
        m.recall_healthy(),
        m.precision_bankrupt(),
        m.precision_healthy(),
    ]
    .iter()
    .map(|v| v.to_string())
    .chain(std::iter::once(m.degenerate.describe()))
    .collect()
}

pub fn report_rows(cv: &CrossValidation) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = cv
        .folds
        .iter()
        .map(|f| ReportRow {
            scope: format!("fold_{}", f.fold),
            hidden_count: Some(f.model.topology.n_hidden()),
            train_mse: Some(f.model.train_mse),
            matrix: Some(f.matrix),
            metrics: f.report,
        })
        .collect();
    rows.push(ReportRow {
        scope: "mean".into(),
        hidden_count: Some(cv.modal_hidden()),
        train_mse: Some(
            cv.folds.iter().map(|f| f.model.train_mse).sum::<f64>() / cv.folds.len() as f64,
        ),
        matrix: None,
        metrics: cv.overall,
    });
    rows.push(ReportRow {
        scope: "pooled".into(),
        hidden_count: None,
        train_mse: None,
        matrix: Some(
            cv.folds
                .iter()
                .fold(ConfusionMatrix::default(), |a, f| a.merge(&f.matrix)),
        ),
        metrics: cv.pooled,
    });
    rows
}

pub fn report_csv(cv: &CrossValidation) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let rows = report_rows(cv).into_iter().map(|r| {
        let mut rec = vec![
            r.scope.clone(),
            opt(r.hidden_count.map(|h| h.to_string())),
            opt(r.train_mse.map(|m| m.to_string())),
        ];
        match r.matrix {
            Some(m) => rec.extend([m.tp, m.tn, m.fp, m.fn_].iter().map(|c| c.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rec.extend(metric_fields(&r.metrics));
        rec
    });
    to_csv(&REPORT_HEADER, rows)
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain(std::iter::once(header[c].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

const TABLE_HEADER: [&str; 8] = [
    "Model",
    "Overall accuracy",
    "Precision",
    "Sensitivity",
    "Specificity",
    "F-measure",
    "Recall bankrupt",
    "Recall non-bankrupt",
];

fn table_cells(name: String, m: &MetricReport) -> Vec<String> {
    vec![
        name,
        pct(m.accuracy),
        pct(m.precision),
        pct(m.recall),
        pct(m.specificity),
        pct(m.f_measure),
        pct(m.recall_bankrupt()),
        pct(m.recall_healthy()),
    ]
}

pub fn report_text(algorithm: Algorithm, cv: &CrossValidation) -> String {
    let rows: Vec<Vec<String>> = report_rows(cv)
        .iter()
        .map(|r| {
            let name = match r.hidden_count {
                Some(h) if r.scope.starts_with("fold") => format!("{} (hidden {h})", r.scope),
                _ => r.scope.clone(),
            };
            table_cells(name, &r.metrics)
        })
        .collect();
    format!(
        "{}\n\n{}",
        algorithm.label(),
        aligned_table(&TABLE_HEADER, &rows)
    )
}

/// Summary rows in the given order; the first maximum of the mean
/// accuracy is flagged as best.
pub fn summary_rows(results: &[(Algorithm, CrossValidation)]) -> Vec<SummaryRow> {
    let best = results
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, (_, cv))| match acc {
            Some((_, a)) if a >= cv.overall.accuracy => acc,
            _ => Some((i, cv.overall.accuracy)),
        })
        .map(|(i, _)| i);
    results
        .iter()
        .enumerate()
        .map(|(i, (a, cv))| SummaryRow {
            algorithm: *a,
            overall: cv.overall,
            pooled_accuracy: cv.pooled.accuracy,
            modal_hidden: cv.modal_hidden(),
            best: Some(i) == best,
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let recs = rows.iter().map(|r| {
        let m = &r.overall;
        let mut rec = vec![
            r.algorithm.key().to_string(),
            r.algorithm.label().to_string(),
        ];
        rec.extend(
            [
                m.accuracy,
                m.precision,
                m.recall,
                m.specificity,
                m.f_measure,
                m.recall_bankrupt(),
                m.recall_healthy(),
                r.pooled_accuracy,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        rec.push(r.modal_hidden.to_string());
        rec.push(u8::from(r.best).to_string());
        rec
    });
    to_csv(&SUMMARY_HEADER, recs)
}

pub fn summary_text(rows: &[SummaryRow], n_inputs: usize) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let name = format!(
                "{}{} ({n_inputs}-{}-1)",
                r.algorithm.label(),
                if r.best { " *" } else { "" },
                r.modal_hidden
            );
            table_cells(name, &r.overall)
        })
        .collect();
    format!(
        "{}\n* best overall accuracy; topology uses the modal hidden count across folds\n",
        aligned_table(&TABLE_HEADER, &cells)
    )
}

fn open_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            message: format!(
                "line {}: bad field {i}",
                rec.position().map_or(0, |p| p.line())
            ),
        })
}

fn optional<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
) -> Result<Option<T>> {
    if rec.get(i).is_some_and(str::is_empty) {
        Ok(None)
    } else {
        field(path, rec, i).map(Some)
    }
}

fn algorithm_field(path: &Path, rec: &csv::StringRecord) -> Result<Algorithm> {
    rec.get(0)
        .unwrap_or_default()
        .parse()
        .map_err(|message| Error::Csv {
            path: path.to_path_buf(),
            message,
        })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let mut r = open_reader(path, &TRACE_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error(path))?;
            Ok(TraceRecord {
                algorithm: algorithm_field(path, &rec)?,
                fold: field(path, &rec, 1)?,
                outer_iter: field(path, &rec, 2)?,
                inner_iter: field(path, &rec, 3)?,
                hidden_count: field(path, &rec, 4)?,
                best_mse: field(path, &rec, 5)?,
            })
        })
        .collect()
}

fn parse_metrics(path: &Path, rec: &csv::StringRecord, at: usize) -> Result<MetricReport> {
    let flags = rec.get(at + 9).unwrap_or_default();
    let has = |n: &str| flags.split('|').any(|f| f == n);
    Ok(MetricReport {
        accuracy: field(path, rec, at)?,
        precision: field(path, rec, at + 1)?,
        recall: field(path, rec, at + 2)?,
        specificity: field(path, rec, at + 3)?,
        f_measure: field(path, rec, at + 4)?,
        negative_precision: field(path, rec, at + 7)?,
        degenerate: crate::metrics::Degenerate {
            precision: has("precision"),
            recall: has("recall"),
            specificity: has("specificity"),
            negative_precision: has("negative_precision"),
            f_measure: has("f_measure"),
        },
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let mut r = open_reader(path, &REPORT_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error(path))?;
            let counts: Vec<Option<u64>> = (3..7)
                .map(|i| optional(path, &rec, i))
                .collect::<Result<_>>()?;
            let matrix = match counts.as_slice() {
                [Some(tp), Some(tn), Some(fp), Some(fn_)] => Some(ConfusionMatrix {
                    tp: *tp,
                    tn: *tn,
                    fp: *fp,
                    fn_: *fn_,
                }),
                _ => None,
            };
            Ok(ReportRow {
                scope: rec.get(0).unwrap_or_default().to_string(),
                hidden_count: optional(path, &rec, 1)?,
                train_mse: optional(path, &rec, 2)?,
                matrix,
                metrics: parse_metrics(path, &rec, 7)?,
            })
        })
        .collect()
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut r = open_reader(path, &SUMMARY_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error(path))?;
            let num = |i| field::<f64>(path, &rec, i);
            Ok(SummaryRow {
                algorithm: algorithm_field(path, &rec)?,
                overall: MetricReport {
                    accuracy: num(2)?,
                    precision: num(3)?,
                    recall: num(4)?,
                    specificity: num(5)?,
                    f_measure: num(6)?,
                    negative_precision: f64::NAN,
                    degenerate: Default::default(),
                },
                pooled_accuracy: num(9)?,
                modal_hidden: field(path, &rec, 10)?,
                best: field::<u8>(path, &rec, 11)? == 1,
            })
        })
        .collect()
}
