use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::phi::PhiMatrix;

/// Sign-normalized decomposition: positive entries shrink the residual's
/// magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionMatrix {
    pub values: DMatrix<f64>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub estimator: String,
}

fn sign(e: f64) -> f64 {
    if e < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `phi_c[i][j] = -sgn(e_i) * phi[i][j]` with `sgn(0) = +1`.
pub fn normalize_contribution(phi: &PhiMatrix) -> ContributionMatrix {
    let mut values = phi.values.clone();
    for (i, e) in phi.residuals_full.iter().enumerate() {
        let s = -sign(*e);
        values.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    ContributionMatrix {
        values,
        train_ids: phi.train_ids.clone(),
        test_ids: phi.test_ids.clone(),
        estimator: phi.meta.estimator.clone(),
    }
}

/// Mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub var: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stats { mean, var }
    }
}

/// Per-instance summary feeding the CC plots.
///
/// Symmetric runs fill every field. Asymmetric runs emit one entry per
/// training instance (contribution only) followed by one per test instance
/// (composition only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcSummary {
    pub id: String,
    pub target: f64,
    pub contribution: Option<Stats>,
    pub composition: Option<Stats>,
    pub self_contribution: Option<f64>,
}

impl CcSummary {
    pub const CSV_HEADER: &'static str =
        "id,target,contribution_mean,contribution_var,composition_mean,composition_var,self_contribution";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.id,
            self.target,
            opt(self.contribution.map(|s| s.mean)),
            opt(self.contribution.map(|s| s.var)),
            opt(self.composition.map(|s| s.mean)),
            opt(self.composition.map(|s| s.var)),
            opt(self.self_contribution),
        )
    }
}

fn target_lookup<'a>(ds: &'a Dataset, ids: &[String]) -> Result<Vec<f64>> {
    let index: HashMap<&'a str, usize> = ds.ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|&i| ds.target(i))
                .ok_or_else(|| Error::UnknownId(id.clone()))
        })
        .collect()
}

/// Contribution (columns of `phi_c`) and composition (rows of `phi`)
/// statistics. The self term is included in both means.
pub fn cc_summary(phi: &PhiMatrix, phi_c: &ContributionMatrix, ds: &Dataset) -> Result<Vec<CcSummary>> {
    if phi_c.values.shape() != phi.values.shape() {
        return Err(Error::invalid("phi and contribution matrices differ in shape"));
    }
    let train_targets = target_lookup(ds, &phi.train_ids)?;
    let test_targets = target_lookup(ds, &phi.test_ids)?;
    let contribution = |j: usize| Stats::of(phi_c.values.column(j).iter().copied());
    let composition = |i: usize| Stats::of(phi.values.row(i).iter().copied());

    if phi.train_ids == phi.test_ids {
        return Ok((0..phi.n_train())
            .map(|k| CcSummary {
                id: phi.train_ids[k].clone(),
                target: train_targets[k],
                contribution: Some(contribution(k)),
                composition: Some(composition(k)),
                self_contribution: Some(phi_c.values[(k, k)]),
            })
            .collect());
    }
    let train = (0..phi.n_train()).map(|j| CcSummary {
        id: phi.train_ids[j].clone(),
        target: train_targets[j],
        contribution: Some(contribution(j)),
        composition: None,
        self_contribution: None,
    });
    let test = (0..phi.n_test()).map(|i| CcSummary {
        id: phi.test_ids[i].clone(),
        target: test_targets[i],
        contribution: None,
        composition: Some(composition(i)),
        self_contribution: None,
    });
    Ok(train.chain(test).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSegment {
    pub train_id: String,
    pub value: f64,
    pub cumulative: f64,
    /// Training target, used for coloring.
    pub color_key: f64,
}

/// One residual laid out as a stacked bar from 0 to `e_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceData {
    pub test_id: String,
    pub base: f64,
    #[serde(rename = "final")]
    pub final_value: f64,
    pub segments: Vec<ForceSegment>,
}

impl ForceData {
    /// Sum of segment magnitudes.
    pub fn extent(&self) -> f64 {
        self.segments.iter().map(|s| s.value.abs()).sum()
    }
}

/// Segments ordered positives first, then negatives, each by descending
/// magnitude (ties by training order).
pub fn force_segments(phi: &PhiMatrix, ds: &Dataset, test_id: &str) -> Result<ForceData> {
    let i = phi
        .test_index(test_id)
        .ok_or_else(|| Error::UnknownId(test_id.to_string()))?;
    let colors = target_lookup(ds, &phi.train_ids)?;
    let row: Vec<f64> = phi.values.row(i).iter().copied().collect();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (row[a], row[b]);
        (va < 0.0)
            .cmp(&(vb < 0.0))
            .then(vb.abs().total_cmp(&va.abs()))
            .then(a.cmp(&b))
    });
    let mut cumulative = 0.0;
    let segments = order
        .into_iter()
        .map(|j| {
            cumulative += row[j];
            ForceSegment {
                train_id: phi.train_ids[j].clone(),
                value: row[j],
                cumulative,
                color_key: colors[j],
            }
        })
        .collect();
    Ok(ForceData {
        test_id: test_id.to_string(),
        base: 0.0,
        final_value: phi.residuals_full[i],
        segments,
    })
}

/// Aggregation of a contribution column into a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// Mean of squared contributions.
    #[default]
    MeanSq,
    /// Square of the mean contribution.
    SqMean,
}

/// One value per training instance.
pub fn contribution_value(phi_c: &ContributionMatrix, kind: ValueKind) -> Vec<f64> {
    let m = phi_c.values.nrows().max(1) as f64;
    phi_c
        .values
        .column_iter()
        .map(|col| match kind {
            ValueKind::MeanSq => col.iter().map(|v| v * v).sum::<f64>() / m,
            ValueKind::SqMean => (col.iter().sum::<f64>() / m).powi(2),
        })
        .collect()
}

/// How far each row's sum is from the residual it decomposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub per_row: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

pub fn decomposition_accuracy(phi: &PhiMatrix) -> Accuracy {
    let per_row: Vec<f64> = (0..phi.n_test())
        .map(|i| (phi.residuals_full[i] - phi.row_sum(i)).abs())
        .collect();
    let mean = per_row.iter().sum::<f64>() / per_row.len().max(1) as f64;
    let max = per_row.iter().copied().fold(0.0, f64::max);
    Accuracy { per_row, mean, max }
}
