use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::contribution::ContributionMatrix;
use super::iforest::iforest_scores;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// Each training instance is a point in test-residual space (its column
    /// of the contribution matrix).
    Behavior,
    /// Raw feature rows.
    Features,
    Both,
}

/// Flagged training ids, highest score first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub behavior: Option<Vec<String>>,
    pub features: Option<Vec<String>>,
    /// Ids flagged in both spaces, in behavior order.
    pub intersection: Option<Vec<String>>,
    pub behavior_scores: Option<Vec<f64>>,
    pub feature_scores: Option<Vec<f64>>,
}

impl OutlierReport {
    /// Rows of `(mode, id)` in a fixed order.
    pub fn flagged(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        for (name, set) in [
            ("behavior", &self.behavior),
            ("features", &self.features),
            ("both", &self.intersection),
        ] {
            if let Some(ids) = set {
                out.extend(ids.iter().map(|id| (name, id.as_str())));
            }
        }
        out
    }
}

fn top_ids(scores: &[f64], ids: &[String], count: usize) -> Vec<String> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
    order.into_iter().take(count).map(|k| ids[k].clone()).collect()
}

/// Isolation-forest outliers among the training instances of `phi_c`.
/// Flags the top `round(contamination * n)` scores (at least one).
pub fn behavioral_outliers(
    phi_c: &ContributionMatrix,
    ds: &Dataset,
    mode: OutlierMode,
    contamination: f64,
    seed: u64,
) -> Result<OutlierReport> {
    if !(contamination > 0.0 && contamination <= 0.5) {
        return Err(Error::invalid(format!("contamination {contamination} outside (0, 0.5]")));
    }
    let ids = &phi_c.train_ids;
    let n = ids.len();
    let count = ((contamination * n as f64).round() as usize).max(1);
    let mut report = OutlierReport::default();

    if matches!(mode, OutlierMode::Behavior | OutlierMode::Both) {
        let points = phi_c.values.transpose();
        let scores = iforest_scores(&points, derive_seed(seed, "outliers_behavior"))?;
        report.behavior = Some(top_ids(&scores, ids, count));
        report.behavior_scores = Some(scores);
    }
    if matches!(mode, OutlierMode::Features | OutlierMode::Both) {
        let index: HashMap<&str, usize> = ds.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownId(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let points = DMatrix::from_fn(n, ds.p(), |i, j| ds.row(rows[i])[j]);
        let scores = iforest_scores(&points, derive_seed(seed, "outliers_features"))?;
        report.features = Some(top_ids(&scores, ids, count));
        report.feature_scores = Some(scores);
    }
    if let (OutlierMode::Both, Some(b), Some(f)) = (mode, &report.behavior, &report.features) {
        let fset: HashSet<&String> = f.iter().collect();
        report.intersection = Some(b.iter().filter(|id| fset.contains(id)).cloned().collect());
    }
    Ok(report)
}
