//! INI-style experiment configuration.
//!
//! ```text
//! # comments start with '#' or ';'
//! [data]
//! path = firms.csv          # or: source = synthetic
//! label_column = label
//! features = r1, r4, r7     # optional subset
//! missing = impute          # or: drop
//!
//! [experiment]
//! algorithms = pso_pso, pso_pso_sa, pso_improved_pso_sa
//! k_folds = 4
//! seed = 0
//! output_dir = results
//!
//! [outer]   swarm_size, max_iterations, c1, c2, w0, w_decay, v_max, hidden_low, hidden_high
//! [inner]   swarm_size, max_iterations, c1, c2, w0, w_decay, v_max, space_low, space_high
//! [anneal]  t0, frac, k_const, c3
//! ```
//!
//! Every omitted key takes its default. Unknown sections and keys are
//! rejected. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pso::{default_v_max, PsoConfig};
use crate::trainer::{Algorithm, TrainerConfig};

const DATA_KEYS: &[&str] = &[
    "source",
    "path",
    "label_column",
    "features",
    "missing",
    "rows",
    "n_features",
    "separation",
    "data_seed",
];
const EXPERIMENT_KEYS: &[&str] = &["algorithms", "k_folds", "seed", "output_dir"];
const OUTER_KEYS: &[&str] = &[
    "swarm_size",
    "max_iterations",
    "c1",
    "c2",
    "w0",
    "w_decay",
    "v_max",
    "hidden_low",
    "hidden_high",
];
const INNER_KEYS: &[&str] = &[
    "swarm_size",
    "max_iterations",
    "c1",
    "c2",
    "w0",
    "w_decay",
    "v_max",
    "space_low",
    "space_high",
];
const ANNEAL_KEYS: &[&str] = &["t0", "frac", "k_const", "c3"];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "data" => Some(DATA_KEYS),
        "experiment" => Some(EXPERIMENT_KEYS),
        "outer" => Some(OUTER_KEYS),
        "inner" => Some(INNER_KEYS),
        "anneal" => Some(ANNEAL_KEYS),
        _ => None,
    }
}

const SECTIONS: &[&str] = &["data", "experiment", "outer", "inner", "anneal"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingMode {
    #[default]
    Impute,
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        label_column: String,
    },
    Synthetic {
        rows: usize,
        n_features: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Stand-in for an upstream variable-selection step.
    pub features: Option<Vec<String>>,
    pub missing: MissingMode,
    pub trainer: TrainerConfig,
    pub algorithms: Vec<Algorithm>,
    pub k_folds: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for everything but the data source.
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            features: None,
            missing: MissingMode::Impute,
            trainer: TrainerConfig::default(),
            algorithms: Algorithm::ALL.to_vec(),
            k_folds: 4,
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: String| Error::ConfigValue {
            path: PathBuf::from("<config>"),
            key: key.to_string(),
            reason,
        };
        if self.algorithms.is_empty() {
            return Err(fail(
                "experiment.algorithms",
                "must name at least one algorithm".into(),
            ));
        }
        if self.k_folds < 2 {
            return Err(fail(
                "experiment.k_folds",
                format!("must be at least 2 (got {})", self.k_folds),
            ));
        }
        if let DataSource::Synthetic {
            rows,
            n_features,
            separation,
            ..
        } = self.data
        {
            if rows < 2 || rows % 2 != 0 {
                return Err(fail(
                    "data.rows",
                    format!("must be an even number >= 2 (got {rows})"),
                ));
            }
            if n_features == 0 {
                return Err(fail("data.n_features", "must be at least 1".into()));
            }
            if !(separation >= 0.0 && separation.is_finite()) {
                return Err(fail(
                    "data.separation",
                    format!("must be >= 0 (got {separation})"),
                ));
            }
        }
        self.trainer.validate().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => fail(name, reason),
            other => other,
        })
    }
}

/// Parsed `key = value` pairs per section, with line numbers.
#[derive(Debug, Default)]
struct Ini {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

fn normalize_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Closest candidate by edit distance on lower-cased, punctuation-free names.
pub fn suggest<'a>(input: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let norm = normalize_key(input);
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(&norm, &normalize_key(c)), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn parse_ini(text: &str, path: &Path) -> Result<Ini> {
    let err = |line: usize, message: String| Error::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut ini = Ini::default();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header `{line}`")))?
                .trim()
                .to_string();
            if section_keys(&name).is_none() {
                let hint = suggest(&name, SECTIONS)
                    .map(|s| format!("; did you mean `[{s}]`?"))
                    .unwrap_or_default();
                return Err(err(line_no, format!("unknown section `[{name}]`{hint}")));
            }
            ini.sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let section = current
            .as_deref()
            .ok_or_else(|| err(line_no, format!("key `{key}` appears before any section")))?;
        let allowed = section_keys(section).expect("section validated on entry");
        if !allowed.contains(&key) {
            let hint = suggest(key, allowed)
                .map(|s| format!("; did you mean `{s}`?"))
                .unwrap_or_default();
            return Err(err(
                line_no,
                format!("unknown key `{key}` in [{section}]{hint}"),
            ));
        }
        let entries = ini.sections.get_mut(section).expect("section inserted");
        if entries
            .insert(key.to_string(), (line_no, value.to_string()))
            .is_some()
        {
            return Err(err(
                line_no,
                format!("duplicate key `{key}` in [{section}]"),
            ));
        }
    }
    Ok(ini)
}

fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    &line[..cut]
}

struct Reader<'a> {
    ini: &'a Ini,
    path: &'a Path,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.ini.sections.get(section).and_then(|s| s.get(key))
    }

    fn value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::Config {
                path: self.path.to_path_buf(),
                line: *line,
                message: format!("`{section}.{key}`: cannot parse `{v}`"),
            }),
        }
    }

    fn text(&self, section: &str, key: &str) -> Option<String> {
        self.raw(section, key).map(|(_, v)| unquote(v).to_string())
    }

    fn list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.text(section, key).map(|v| {
            v.split(',')
                .map(|s| unquote(s.trim()).to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    fn range_error(&self, section: &str, key: &str, reason: String) -> Error {
        Error::ConfigValue {
            path: self.path.to_path_buf(),
            key: format!("{section}.{key}"),
            reason,
        }
    }

    fn pso(&self, section: &str, base: &mut PsoConfig) -> Result<()> {
        if let Some(v) = self.value(section, "swarm_size")? {
            base.swarm_size = v;
        }
        if let Some(v) = self.value(section, "max_iterations")? {
            base.max_iterations = v;
        }
        for (key, slot) in [
            ("c1", &mut base.c1),
            ("c2", &mut base.c2),
            ("w0", &mut base.w0),
            ("w_decay", &mut base.w_decay),
        ] {
            if let Some(v) = self.value::<f64>(section, key)? {
                *slot = v;
            }
        }
        if base.swarm_size == 0 {
            return Err(self.range_error(section, "swarm_size", "must be at least 1".into()));
        }
        if base.max_iterations == 0 {
            return Err(self.range_error(section, "max_iterations", "must be at least 1".into()));
        }
        for (key, v) in [("c1", base.c1), ("c2", base.c2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(self.range_error(section, key, format!("must be >= 0 (got {v})")));
            }
        }
        if !base.w0.is_finite() {
            return Err(self.range_error(section, "w0", "must be finite".into()));
        }
        if !(base.w_decay > 0.0 && base.w_decay <= 1.0) {
            return Err(self.range_error(
                section,
                "w_decay",
                format!("must lie in (0, 1] (got {})", base.w_decay),
            ));
        }
        Ok(())
    }

    fn v_max(&self, section: &str, low: f64, high: f64) -> Result<f64> {
        match self.value::<f64>(section, "v_max")? {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(self.range_error(section, "v_max", format!("must be > 0 (got {v})")))
            }
            Some(v) => Ok(v),
            None => Ok(default_v_max(low, high).max(f64::MIN_POSITIVE)),
        }
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(s)
}

/// Parses config text; `path` is used for diagnostics and to resolve
/// relative paths.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let ini = parse_ini(text, path)?;
    let r = Reader { ini: &ini, path };
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: String| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };
    let missing_source = || Error::Config {
        path: path.to_path_buf(),
        line: 0,
        message: "no data source: set `path` or `source = synthetic` in [data]".into(),
    };
    if !ini.sections.contains_key("data") {
        return Err(missing_source());
    }

    let seed: u64 = r.value("experiment", "seed")?.unwrap_or(0);
    let source = r.text("data", "source");
    let data = match source.as_deref() {
        Some("synthetic") => DataSource::Synthetic {
            rows: r.value("data", "rows")?.unwrap_or(400),
            n_features: r.value("data", "n_features")?.unwrap_or(2),
            separation: r.value("data", "separation")?.unwrap_or(4.0),
            seed: r.value("data", "data_seed")?.unwrap_or(seed),
        },
        Some("csv") | None => {
            let file = r.text("data", "path").ok_or_else(missing_source)?;
            DataSource::Csv {
                path: resolve(file),
                label_column: r
                    .text("data", "label_column")
                    .unwrap_or_else(|| "label".into()),
            }
        }
        Some(other) => {
            return Err(r.range_error(
                "data",
                "source",
                format!("must be `csv` or `synthetic` (got `{other}`)"),
            ))
        }
    };
    let missing = match r.text("data", "missing").as_deref() {
        None | Some("impute") => MissingMode::Impute,
        Some("drop") => MissingMode::Drop,
        Some(other) => {
            return Err(r.range_error(
                "data",
                "missing",
                format!("must be `impute` or `drop` (got `{other}`)"),
            ))
        }
    };

    let mut cfg = ExperimentConfig::new(data);
    cfg.missing = missing;
    cfg.seed = seed;
    cfg.features = r.list("data", "features");
    if let Some(list) = r.list("experiment", "algorithms") {
        cfg.algorithms = list
            .iter()
            .map(|a| a.parse::<Algorithm>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| r.range_error("experiment", "algorithms", e))?;
        cfg.algorithms.dedup();
    }
    if let Some(k) = r.value("experiment", "k_folds")? {
        cfg.k_folds = k;
    }
    if let Some(dir) = r.text("experiment", "output_dir") {
        cfg.output_dir = resolve(dir);
    } else {
        cfg.output_dir = resolve("results".into());
    }

    let mut trainer = TrainerConfig::default();
    let low = r
        .value("outer", "hidden_low")?
        .unwrap_or(trainer.hidden_low);
    let high = r
        .value("outer", "hidden_high")?
        .unwrap_or(trainer.hidden_high);
    if low == 0 {
        return Err(r.range_error("outer", "hidden_low", "must be at least 1".into()));
    }
    if low > high {
        return Err(r.range_error(
            "outer",
            "hidden_high",
            format!("must be >= hidden_low (got [{low}, {high}])"),
        ));
    }
    trainer = trainer.with_hidden_bounds(low, high);
    r.pso("outer", &mut trainer.outer)?;
    trainer.outer.v_max = r.v_max("outer", low as f64, high as f64)?;

    r.pso("inner", &mut trainer.inner)?;
    if let Some(v) = r.value("inner", "space_low")? {
        trainer.inner.space_low = v;
    }
    if let Some(v) = r.value("inner", "space_high")? {
        trainer.inner.space_high = v;
    }
    if trainer.inner.space_low.is_nan()
        || trainer.inner.space_high.is_nan()
        || trainer.inner.space_low >= trainer.inner.space_high
    {
        return Err(r.range_error(
            "inner",
            "space_high",
            format!(
                "must exceed space_low (got [{}, {}])",
                trainer.inner.space_low, trainer.inner.space_high
            ),
        ));
    }
    trainer.inner.v_max = r.v_max("inner", trainer.inner.space_low, trainer.inner.space_high)?;

    let a = &mut trainer.anneal;
    for (key, slot) in [
        ("t0", &mut a.t0),
        ("frac", &mut a.frac),
        ("k_const", &mut a.k_const),
        ("c3", &mut a.c3),
    ] {
        if let Some(v) = r.value::<f64>("anneal", key)? {
            *slot = v;
        }
    }
    if a.t0.is_nan() || a.t0 <= 0.0 {
        return Err(r.range_error("anneal", "t0", format!("must be > 0 (got {})", a.t0)));
    }
    if !(a.frac > 0.0 && a.frac < 1.0) {
        return Err(r.range_error(
            "anneal",
            "frac",
            format!("must lie in (0, 1) (got {})", a.frac),
        ));
    }
    if a.k_const.is_nan() || a.k_const <= 0.0 {
        return Err(r.range_error(
            "anneal",
            "k_const",
            format!("must be > 0 (got {})", a.k_const),
        ));
    }
    if a.c3.is_nan() || a.c3 < 0.0 {
        return Err(r.range_error("anneal", "c3", format!("must be >= 0 (got {})", a.c3)));
    }
    cfg.trainer = trainer;

    cfg.validate().map_err(|e| match e {
        Error::ConfigValue { key, reason, .. } => Error::ConfigValue {
            path: path.to_path_buf(),
            key,
            reason,
        },
        other => other,
    })?;
    Ok(cfg)
}

/// Reads, parses and checks an experiment config file.
pub fn validate_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_config(&text, path)
}
