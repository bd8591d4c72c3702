//! The decomposition matrix and its on-disk form.
//!
//! On disk a `PhiMatrix` is a CSV (`id`, one column per training id,
//! `residual_full`; one row per test id) plus a JSON sidecar with [`RunMeta`].

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Run metadata echoed next to every decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub estimator: String,
    pub seed: u64,
    pub permutations_used: usize,
    pub truncation_tol: f64,
    pub convergence_tol: f64,
    pub converged: bool,
    pub wall_time_seconds: f64,
    pub model: ModelSpec,
    #[serde(default)]
    pub additivity_violated: bool,
    /// Effective configuration, when run through the command line.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

impl RunMeta {
    pub fn new(estimator: &str, seed: u64, model: ModelSpec) -> Self {
        Self {
            estimator: estimator.to_string(),
            seed,
            permutations_used: 0,
            truncation_tol: 0.0,
            convergence_tol: 0.0,
            converged: true,
            wall_time_seconds: 0.0,
            model,
            additivity_violated: false,
            config: serde_json::Value::Null,
        }
    }
}

/// `values[(i, j)]` is the share of test instance `i`'s residual attributed
/// to training instance `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    pub values: DMatrix<f64>,
    pub residuals_full: Vec<f64>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub meta: RunMeta,
    /// Per-cell standard errors of the Monte Carlo mean, when available.
    pub std_errors: Option<DMatrix<f64>>,
}

impl PhiMatrix {
    pub fn n_test(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_train(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values.row(i).iter().sum()
    }

    pub fn test_index(&self, id: &str) -> Option<usize> {
        self.test_ids.iter().position(|x| x == id)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id");
        for id in &self.train_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push_str(",residual_full\n");
        for i in 0..self.n_test() {
            out.push_str(&self.test_ids[i]);
            for j in 0..self.n_train() {
                out.push(',');
                out.push_str(&self.values[(i, j)].to_string());
            }
            out.push(',');
            out.push_str(&self.residuals_full[i].to_string());
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv_string()).map_err(|e| Error::io(&csv, e))?;
        let meta = dir.join(format!("{stem}.meta.json"));
        let json = serde_json::to_string_pretty(&self.meta)? + "\n";
        fs::write(&meta, json).map_err(|e| Error::io(&meta, e))
    }

    /// Reads a matrix CSV; the sidecar is read from `<csv stem>.meta.json`.
    pub fn read(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let meta_path = csv_path.with_extension("meta.json");
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: RunMeta = serde_json::from_str(&meta_text)?;
        Self::parse_csv(&text, meta)
    }

    pub fn parse_csv(text: &str, meta: RunMeta) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.len() < 3 || headers[0] != "id" || headers.last().map(String::as_str) != Some("residual_full") {
            return Err(Error::Csv(
                "phi header must be id,<train ids...>,residual_full".into(),
            ));
        }
        let train_ids = headers[1..headers.len() - 1].to_vec();
        let n_train = train_ids.len();
        let mut test_ids = Vec::new();
        let mut residuals = Vec::new();
        let mut flat = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            if rec.len() != n_train + 2 {
                return Err(Error::Csv(format!("row {} has {} cells", r + 1, rec.len())));
            }
            test_ids.push(rec[0].to_string());
            for c in 1..rec.len() {
                let v: f64 = rec[c].parse().map_err(|_| Error::NonNumeric {
                    row: r + 1,
                    column: headers[c].clone(),
                    value: rec[c].to_string(),
                })?;
                if c == rec.len() - 1 {
                    residuals.push(v);
                } else {
                    flat.push(v);
                }
            }
        }
        Ok(Self {
            values: DMatrix::from_row_slice(test_ids.len(), n_train, &flat),
            residuals_full: residuals,
            train_ids,
            test_ids,
            meta,
            std_errors: None,
        })
    }
}
