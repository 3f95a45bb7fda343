//! Dataset ingestion, fold planning and noise injection.
//!
//! Features are kept raw: no scaling or centering is applied anywhere, so
//! outliers reach the dissimilarities untouched.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Dense row-major feature matrix with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Option<Vec<usize>>,
    feature_names: Option<Vec<String>>,
    n_classes: usize,
}

impl DataMatrix {
    /// Builds an unlabeled matrix from row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain(format!(
                "matrix must have at least one row and one column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::domain(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            values,
            labels: None,
            feature_names: None,
            n_classes: 0,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::domain(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Attaches labels; the class count is `max(label) + 1`.
    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        self.with_labels_and_classes(labels, n_classes)
    }

    pub fn with_labels_and_classes(mut self, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(Error::domain(format!(
                "{} labels for {} rows",
                labels.len(),
                self.rows
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::domain(format!(
                "label {bad} outside [0, {n_classes})"
            )));
        }
        self.labels = Some(labels);
        self.n_classes = n_classes;
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols {
            return Err(Error::domain(format!(
                "{} feature names for {} columns",
                names.len(),
                self.cols
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of classes `M`; zero when unlabeled.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Sub-matrix of the given rows, in the given order. Labels, class count
    /// and names carry over. The result may have zero rows.
    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            rows: idx.len(),
            cols: self.cols,
            values,
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Drops labels and the class count.
    pub fn clear_labels(&mut self) {
        self.labels = None;
        self.n_classes = 0;
    }

    /// Copy with `f` applied to every feature value; labels untouched.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<DataMatrix> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("mapping produced a non-finite value"));
        }
        Ok(DataMatrix {
            values,
            ..self.clone()
        })
    }

    /// Writes the matrix as CSV with a header; the label, if any, goes in a
    /// final `label` column. Values use the shortest round-trip decimal form,
    /// so re-loading reproduces them bit for bit.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = match &self.feature_names {
            Some(n) => n.clone(),
            None => (0..self.cols).map(|j| format!("x{j}")).collect(),
        };
        if self.labels.is_some() {
            header.push("label".to_string());
        }
        w.write_record(&header).map_err(csv_io)?;
        for i in 0..self.rows {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

impl From<usize> for LabelColumn {
    fn from(i: usize) -> Self {
        LabelColumn::Index(i)
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    label_col: Option<&LabelColumn>,
    has_header: bool,
) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    read_csv(file, path, label_col, has_header)
}

/// Parses CSV from any reader; `origin` only names the source in errors.
///
/// A feature column is numeric when its first cell parses as a finite
/// number; a numeric column with a later unparseable cell is an error.
/// Other columns are categorical and get ordinal codes by first appearance.
/// Numeric label columns are coded by ascending value, textual ones by first
/// appearance.
pub fn read_csv<R: Read>(
    reader: R,
    origin: &Path,
    label_col: Option<&LabelColumn>,
    has_header: bool,
) -> Result<DataMatrix> {
    let ingest = |msg: String| Error::Ingest {
        path: origin.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ingest(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    let header = if has_header && !records.is_empty() {
        Some(records.remove(0))
    } else {
        None
    };
    if records.is_empty() {
        return Err(ingest("no data rows".to_string()));
    }
    let width = header.as_ref().map_or(records[0].len(), |h| h.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(ingest(format!(
                "ragged row {}: {} fields, expected {width}",
                i + 1,
                rec.len()
            )));
        }
    }

    let label_idx = match label_col {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(ingest(format!(
                    "label column {i} out of range for {width} columns"
                )));
            }
            Some(*i)
        }
        Some(LabelColumn::Name(name)) => {
            let h = header
                .as_ref()
                .ok_or_else(|| ingest(format!("label column '{name}' needs a header row")))?;
            Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| ingest(format!("no column named '{name}'")))?,
            )
        }
    };
    let feature_cols: Vec<usize> = (0..width).filter(|c| Some(*c) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(ingest("no feature columns".to_string()));
    }

    let rows = records.len();
    let cols = feature_cols.len();
    let mut values = vec![0.0; rows * cols];
    for (out_j, &c) in feature_cols.iter().enumerate() {
        let categorical = parse_finite(&records[0][c]).is_none();
        let mut codes: HashMap<&str, usize> = HashMap::new();
        for (i, rec) in records.iter().enumerate() {
            let cell = &rec[c];
            let cell_err = |msg: &str| Error::IngestCell {
                path: origin.to_path_buf(),
                row: i + 1,
                col: c + 1,
                msg: msg.to_string(),
            };
            if cell.is_empty() {
                return Err(cell_err("missing value"));
            }
            values[i * cols + out_j] = if categorical {
                let next = codes.len();
                *codes.entry(cell).or_insert(next) as f64
            } else {
                parse_finite(cell)
                    .ok_or_else(|| cell_err(&format!("cannot parse '{cell}' as a number")))?
            };
        }
    }

    let mut data = DataMatrix::new(rows, cols, values)?;
    if let Some(h) = &header {
        data = data.with_feature_names(feature_cols.iter().map(|&c| h[c].to_string()).collect())?;
    }
    if let Some(li) = label_idx {
        let tokens: Vec<&str> = records.iter().map(|r| &r[li]).collect();
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(Error::IngestCell {
                path: origin.to_path_buf(),
                row: i + 1,
                col: li + 1,
                msg: "missing label".to_string(),
            });
        }
        let (labels, n_classes) = encode_labels(&tokens);
        data = data.with_labels_and_classes(labels, n_classes)?;
    }
    Ok(data)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn encode_labels(tokens: &[&str]) -> (Vec<usize>, usize) {
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| parse_finite(t)).collect();
    if let Some(nums) = numeric {
        let mut distinct = nums.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let labels = nums
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
        (labels, distinct.len())
    } else {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        let labels = tokens
            .iter()
            .map(|t| {
                let next = codes.len();
                *codes.entry(t).or_insert(next)
            })
            .collect();
        (labels, codes.len())
    }
}

/// One dataset entry of a manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label_col: LabelColumn,
    pub n_classes: usize,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

fn default_true() -> bool {
    true
}

/// Dataset name → location and schema. Relative paths resolve against the
/// manifest's own directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub datasets: BTreeMap<String, ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn load_dataset(&self, name: &str) -> Result<DataMatrix> {
        let entry = self
            .datasets
            .get(name)
            .ok_or_else(|| Error::config(format!("dataset '{name}' not in manifest")))?;
        let path = self.base_dir.join(&entry.path);
        let data = load_csv(&path, Some(&entry.label_col), entry.has_header)?;
        if data.n_classes() != entry.n_classes {
            return Err(Error::Ingest {
                path,
                msg: format!(
                    "manifest says {} classes, file has {}",
                    entry.n_classes,
                    data.n_classes()
                ),
            });
        }
        Ok(data)
    }
}

/// Seeded assignment of rows to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Shuffles row indices with the seeded stream and deals them out
    /// round-robin, so fold sizes differ by at most one.
    pub fn new(rows: usize, n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::config(format!(
                "need at least 2 folds, got {n_folds}"
            )));
        }
        if n_folds > rows {
            return Err(Error::config(format!(
                "{n_folds} folds requested for {rows} rows"
            )));
        }
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng::seeded(seed));
        let mut assignments = vec![0; rows];
        for (pos, &row) in order.iter().enumerate() {
            assignments[row] = pos % n_folds;
        }
        Ok(Self {
            n_folds,
            seed,
            assignments,
        })
    }

    /// (train rows, test rows) for fold `f`, each ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn split_folds(data: &DataMatrix, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::new(data.rows(), n_folds, seed)
}

/// Rows chosen for perturbation: `ceil(level * rows)` distinct indices,
/// ascending.
pub fn noise_rows(rows: usize, level: f64, seed: u64) -> Result<Vec<usize>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("noise level {level} outside (0, 1)")));
    }
    // 1e-9 guard keeps products like 0.1 * 100 from rounding up to 11
    let count = ((level * rows as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut picked =
        rand::seq::index::sample(&mut rng::seeded(seed), rows, count.min(rows)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Adds an independent N(0, 1) draw to every feature of `ceil(level * rows)`
/// uniformly chosen rows. Labels are untouched; the input is not modified.
pub fn inject_noise(data: &DataMatrix, level: f64, seed: u64) -> Result<DataMatrix> {
    let picked = noise_rows(data.rows(), level, seed)?;
    // separate stream for the Gaussian draws so row choice and values don't
    // share state
    let mut gauss = rng::seeded(rng::derive_seed(seed, &["gaussian-noise"]));
    let mut out = data.clone();
    let cols = data.cols();
    for &i in &picked {
        for v in &mut out.values[i * cols..(i + 1) * cols] {
            let z: f64 = StandardNormal.sample(&mut gauss);
            *v += z;
        }
    }
    Ok(out)
}
