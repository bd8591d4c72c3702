//! Dataset ingestion, synthetic generators and train/test splits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Feature matrix (row-major), targets and row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    p: usize,
    targets: Vec<f64>,
    ids: Vec<String>,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    /// Builds a dataset from rows. Ids default to the row index.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut features = Vec::with_capacity(n * p);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != p {
                return Err(Error::invalid(format!(
                    "row {i} has {} features, expected {p}",
                    r.len()
                )));
            }
            features.extend(r);
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Self::new(features, p, targets, ids, names, "target".to_string())
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn new(
        features: Vec<f64>,
        p: usize,
        targets: Vec<f64>,
        ids: Vec<String>,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        if p == 0 {
            return Err(Error::invalid("dataset has no feature columns"));
        }
        if features.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: features.len(),
            });
        }
        if ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: ids.len(),
            });
        }
        if feature_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: feature_names.len(),
            });
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self {
            features,
            n,
            p,
            targets,
            ids,
            feature_names,
            target_name,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Copy with the given targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.p,
            targets,
            self.ids.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
        )
    }

    /// Copy with the given ids.
    pub fn with_ids(&self, ids: Vec<String>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.p,
            self.targets.clone(),
            ids,
            self.feature_names.clone(),
            self.target_name.clone(),
        )
    }

    /// Checks that every index is a valid row.
    pub fn check_indices(&self, indices: &[usize]) -> Result<()> {
        match indices.iter().find(|&&i| i >= self.n) {
            Some(&i) => Err(Error::invalid(format!(
                "row index {i} out of range for {} rows",
                self.n
            ))),
            None => Ok(()),
        }
    }

    /// Z-scores every feature column using statistics of `fit_rows` only.
    /// Constant columns are centered but not scaled.
    pub fn standardized(&self, fit_rows: &[usize]) -> Result<Self> {
        if fit_rows.is_empty() {
            return Err(Error::invalid("standardization needs at least one row"));
        }
        self.check_indices(fit_rows)?;
        let m = fit_rows.len() as f64;
        let mut out = self.features.clone();
        for c in 0..self.p {
            let mean = fit_rows.iter().map(|&r| self.row(r)[c]).sum::<f64>() / m;
            let var = fit_rows
                .iter()
                .map(|&r| (self.row(r)[c] - mean).powi(2))
                .sum::<f64>()
                / m;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in 0..self.n {
                out[r * self.p + c] = (self.features[r * self.p + c] - mean) / sd;
            }
        }
        Self::new(
            out,
            self.p,
            self.targets.clone(),
            self.ids.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
        )
    }
}

/// Reads a CSV file. Ids come from an `id` column when present.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    load_csv_with(path, target_column, "id")
}

/// Reads a CSV file with an explicitly named id column (used only if present).
pub fn load_csv_with(path: impl AsRef<Path>, target_column: &str, id_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, target_column, id_column)
}

/// Parses CSV text from any reader.
pub fn parse_csv<R: Read>(reader: R, target_column: &str, id_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_pos = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::invalid(format!("target column {target_column:?} not found")))?;
    let id_pos = headers.iter().position(|h| h == id_column);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != target_pos && Some(c) != id_pos)
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut ids = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = r + 1;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumeric {
                    row,
                    column: headers[c].clone(),
                    value: raw.to_string(),
                }),
            }
        };
        for &c in &feature_cols {
            features.push(cell(c)?);
        }
        targets.push(cell(target_pos)?);
        ids.push(match id_pos {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => r.to_string(),
        });
    }
    if targets.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(
        features,
        feature_cols.len(),
        targets,
        ids,
        names,
        target_column.to_string(),
    )
}

/// Writes a dataset as CSV with a leading `id` column and the target last.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_csv_string(ds).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(ds: &Dataset) -> String {
    let mut out = String::from("id");
    for name in ds.feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push(',');
    out.push_str(ds.target_name());
    out.push('\n');
    for i in 0..ds.n() {
        out.push_str(ds.id(i));
        for v in ds.row(i) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push(',');
        out.push_str(&ds.target(i).to_string());
        out.push('\n');
    }
    out
}

/// `n` points uniform in `[-1, 1]^p` with `y = sum(x) + N(0, noise_sd^2)`.
pub fn synthesize_linear(n: usize, p: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("synthesize_linear needs n >= 1 and p >= 1"));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    let mut rng = stream_rng(derive_seed(seed, "synthesize_linear"), 0);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut features = Vec::with_capacity(n * p);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = 0.0;
        for _ in 0..p {
            let x: f64 = rng.random_range(-1.0..=1.0);
            y += x;
            features.push(x);
        }
        if noise_sd > 0.0 {
            y += noise.sample(&mut rng);
        }
        targets.push(y);
    }
    Dataset::new(
        features,
        p,
        targets,
        (0..n).map(|i| i.to_string()).collect(),
        (0..p).map(|j| format!("x{j}")).collect(),
        "target".to_string(),
    )
}

/// Shifts the targets of `count` seeded-random rows by `shift`.
/// Returns the modified copy and the affected ids in row order.
pub fn inject_anomalies(
    ds: &Dataset,
    count: usize,
    shift: f64,
    seed: u64,
) -> Result<(Dataset, Vec<String>)> {
    if count == 0 || count > ds.n() {
        return Err(Error::invalid(format!(
            "anomaly count must be in 1..={}, got {count}",
            ds.n()
        )));
    }
    let mut rng = stream_rng(derive_seed(seed, "inject_anomalies"), 0);
    let mut picked = index::sample(&mut rng, ds.n(), count).into_vec();
    picked.sort_unstable();
    let mut targets = ds.targets().to_vec();
    for &i in &picked {
        targets[i] += shift;
    }
    let ids = picked.iter().map(|&i| ds.id(i).to_string()).collect();
    Ok((ds.with_targets(targets)?, ids))
}

/// Train/test index plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    train: Vec<usize>,
    test: Vec<usize>,
    symmetric: bool,
}

impl SplitPlan {
    /// Train and test are both every row.
    pub fn symmetric(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        Self {
            train: all.clone(),
            test: all,
            symmetric: true,
        }
    }

    /// Explicit index lists. `symmetric` is set iff the lists are equal.
    pub fn from_indices(train: Vec<usize>, test: Vec<usize>, n: usize) -> Result<Self> {
        for (name, v) in [("train", &train), ("test", &test)] {
            if v.is_empty() {
                return Err(Error::invalid(format!("{name} indices are empty")));
            }
            let mut seen = HashSet::new();
            for &i in v.iter() {
                if i >= n {
                    return Err(Error::invalid(format!("{name} index {i} out of range")));
                }
                if !seen.insert(i) {
                    return Err(Error::invalid(format!("duplicate {name} index {i}")));
                }
            }
        }
        let symmetric = train == test;
        Ok(Self {
            train,
            test,
            symmetric,
        })
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Builds a split. Asymmetric splits shuffle with `seed` and put
/// `round(n * test_fraction)` rows (at least one, leaving at least one) in test.
pub fn make_split(n: usize, test_fraction: f64, seed: u64, symmetric: bool) -> Result<SplitPlan> {
    if symmetric {
        if n == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        return Ok(SplitPlan::symmetric(n));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) || n < 2 {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty train or test set for {n} rows"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(derive_seed(seed, "split"), 0));
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    SplitPlan::from_indices(train, test, n)
}
