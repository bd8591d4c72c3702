use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

const EULER_GAMMA: f64 = 0.5772156649;
const TREES: usize = 100;
const MAX_SAMPLES: usize = 256;

/// Average unsuccessful-search path length in a binary search tree of `m`
/// points.
pub fn average_path_length(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = m as f64;
            2.0 * ((m - 1.0).ln() + EULER_GAMMA) - 2.0 * (m - 1.0) / m
        }
    }
}

enum Node {
    External(usize),
    Internal {
        attr: usize,
        split: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

fn build(points: &DMatrix<f64>, rows: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> Node {
    if depth >= limit || rows.len() <= 1 {
        return Node::External(rows.len());
    }
    let ranges: Vec<(usize, f64, f64)> = (0..points.ncols())
        .filter_map(|a| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(points[(r, a)]), hi.max(points[(r, a)]))
            });
            (hi > lo).then_some((a, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::External(rows.len());
    }
    let (attr, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let split = rng.random_range(lo..hi);
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| points[(r, attr)] <= split);
    Node::Internal {
        attr,
        split,
        left: Box::new(build(points, left, depth + 1, limit, rng)),
        right: Box::new(build(points, right, depth + 1, limit, rng)),
    }
}

fn path_length(node: &Node, x: &[f64], depth: usize) -> f64 {
    match node {
        Node::External(size) => depth as f64 + average_path_length(*size),
        Node::Internal {
            attr,
            split,
            left,
            right,
        } => {
            let next = if x[*attr] <= *split { left } else { right };
            path_length(next, x, depth + 1)
        }
    }
}

pub struct IsolationForest {
    trees: Vec<Node>,
    sample_size: usize,
}

impl IsolationForest {
    /// Fits `TREES` trees on subsamples of `min(256, n)` rows.
    pub fn fit(points: &DMatrix<f64>, seed: u64) -> Result<Self> {
        Self::fit_with(points, seed, TREES)
    }

    pub fn fit_with(points: &DMatrix<f64>, seed: u64, trees: usize) -> Result<Self> {
        let n = points.nrows();
        if n < 2 {
            return Err(Error::invalid(format!("isolation forest needs >= 2 points, got {n}")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("isolation forest input contains non-finite values"));
        }
        let psi = n.min(MAX_SAMPLES);
        let limit = (psi as f64).log2().ceil() as usize;
        let base = derive_seed(seed, "iforest");
        let trees = (0..trees)
            .map(|t| {
                let mut rng = stream_rng(base, t as u64);
                let rows = index::sample(&mut rng, n, psi).into_vec();
                build(points, rows, 0, limit, &mut rng)
            })
            .collect();
        Ok(Self { trees, sample_size: psi })
    }

    /// `2^(-E[h(x)] / c(psi))`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mean = self.trees.iter().map(|t| path_length(t, x, 0)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean / average_path_length(self.sample_size))
    }
}

/// Anomaly score per row; higher is more anomalous.
pub fn iforest_scores(points: &DMatrix<f64>, seed: u64) -> Result<Vec<f64>> {
    let forest = IsolationForest::fit(points, seed)?;
    Ok(points
        .row_iter()
        .map(|r| {
            let x: Vec<f64> = r.iter().copied().collect();
            forest.score(&x)
        })
        .collect())
}
