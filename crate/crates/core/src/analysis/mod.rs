//! Products derived from a decomposition: contribution normalization, CC
//! summaries, force-plot data, behavioral outliers, valuation and ablation.

mod contribution;
mod iforest;
mod outliers;
mod valuation;

pub use contribution::{
    cc_summary, contribution_value, decomposition_accuracy, force_segments, normalize_contribution,
    Accuracy, CcSummary, ContributionMatrix, ForceData, ForceSegment, Stats, ValueKind,
};
pub use iforest::{average_path_length, iforest_scores, IsolationForest};
pub use outliers::{behavioral_outliers, OutlierMode, OutlierReport};
pub use valuation::{
    ablation_curve, data_shapley_values, AblationRow, DataShapley, Direction,
};

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}
