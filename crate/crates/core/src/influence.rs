//! First-order influence approximations for ridge regression.
//!
//! Adding training row `j` to a ridge model fit on `S` changes the residual at
//! row `i` by approximately `-(c + u_i^T G u_j) e_j`, where `G` is the inverse
//! regularized Gram matrix of `S`, `u` are features centered on the `S` mean,
//! `e_j` is `j`'s residual under the `S` model and `c = 1/|S|` accounts for the
//! unpenalized intercept (zero without one). The gradient step uses the fixed
//! `G` of `S`; it omits the `1/(1 + leverage)` factor of an exact rank-one
//! update.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, SplitPlan};
use crate::engine::{coalition_residuals, default_threads, run_in_pool};
use crate::error::{Error, Result};
use crate::models::{ridge_system, ModelKind, ModelSpec};
use crate::phi::{PhiMatrix, RunMeta};
use crate::rng::{derive_seed, stream_rng};

const CHUNK: usize = 16;

/// Ridge fit on a subset together with its inverse Gram matrix.
#[derive(Debug, Clone)]
pub struct RidgeState {
    gram_inverse: DMatrix<f64>,
    theta: Vec<f64>,
    intercept: f64,
    x_mean: Vec<f64>,
    subset: Vec<usize>,
    /// `1/|S|` with an intercept, otherwise zero.
    intercept_leverage: f64,
}

impl RidgeState {
    /// Fits ridge on dataset rows `subset` (may be empty: `G = I / lambda`).
    pub fn new(ds: &Dataset, subset: &[usize], lambda: f64, intercept: bool) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("ridge lambda must be > 0, got {lambda}")));
        }
        ds.check_indices(subset)?;
        let with_intercept = intercept && !subset.is_empty();
        let (a, b, x_mean, y_mean) = ridge_system(ds, subset, lambda, with_intercept);
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("ridge Gram matrix is not positive definite".into()))?;
        let gram_inverse = chol.inverse();
        let check = &gram_inverse * &a;
        let p = ds.p();
        for r in 0..p {
            for c in 0..p {
                let target = if r == c { 1.0 } else { 0.0 };
                if (check[(r, c)] - target).abs() > 1e-8 {
                    return Err(Error::Singular(format!(
                        "inverse Gram check failed at ({r}, {c}): {}",
                        check[(r, c)]
                    )));
                }
            }
        }
        let theta: DVector<f64> = &gram_inverse * b;
        let icpt = if with_intercept {
            y_mean - theta.iter().zip(&x_mean).map(|(t, m)| t * m).sum::<f64>()
        } else {
            0.0
        };
        Ok(Self {
            gram_inverse,
            theta: theta.iter().copied().collect(),
            intercept: icpt,
            x_mean,
            subset: subset.to_vec(),
            intercept_leverage: if with_intercept {
                1.0 / subset.len() as f64
            } else {
                0.0
            },
        })
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn residual(&self, ds: &Dataset, row: usize) -> f64 {
        self.intercept
            + self.theta.iter().zip(ds.row(row)).map(|(t, x)| t * x).sum::<f64>()
            - ds.target(row)
    }

    fn centered(&self, ds: &Dataset, row: usize) -> Vec<f64> {
        ds.row(row).iter().zip(&self.x_mean).map(|(x, m)| x - m).collect()
    }

    /// Leverage `c + u_j^T G u_j` of a candidate row.
    pub fn leverage(&self, ds: &Dataset, row: usize) -> f64 {
        let u = DVector::from_vec(self.centered(ds, row));
        self.intercept_leverage + u.dot(&(&self.gram_inverse * &u))
    }

    /// First-order change of the test residuals when `candidate` joins.
    pub fn add_marginal(&self, ds: &Dataset, candidate: usize, test: &[usize]) -> Result<Vec<f64>> {
        if self.subset.contains(&candidate) {
            return Err(Error::invalid(format!(
                "row {candidate} is already in the subset"
            )));
        }
        ds.check_indices(&[candidate])?;
        ds.check_indices(test)?;
        Ok(self.marginal_unchecked(ds, candidate, test))
    }

    fn marginal_unchecked(&self, ds: &Dataset, candidate: usize, test: &[usize]) -> Vec<f64> {
        let e = self.residual(ds, candidate);
        let g = &self.gram_inverse * DVector::from_vec(self.centered(ds, candidate));
        test.iter()
            .map(|&t| {
                let dot: f64 = ds
                    .row(t)
                    .iter()
                    .zip(&self.x_mean)
                    .zip(g.iter())
                    .map(|((x, m), gv)| (x - m) * gv)
                    .sum();
                -(self.intercept_leverage + dot) * e
            })
            .collect()
    }
}

/// Free-function form of [`RidgeState::add_marginal`].
pub fn influence_add_marginal(
    state: &RidgeState,
    ds: &Dataset,
    candidate: usize,
    test: &[usize],
) -> Result<Vec<f64>> {
    state.add_marginal(ds, candidate, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceConfig {
    /// Defaults to twice the number of training rows.
    pub subset_samples: Option<usize>,
    pub seed: u64,
    pub threads: usize,
    /// Value the empty-prefix marginals with real singleton fits.
    pub exact_singletons: bool,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            subset_samples: None,
            seed: 0,
            threads: default_threads(),
            exact_singletons: true,
        }
    }
}

fn ridge_params(spec: &ModelSpec) -> Result<(f64, bool)> {
    match spec.kind {
        ModelKind::Ridge { lambda, intercept } => Ok((lambda, intercept)),
        _ => Err(Error::Incompatible("influence requires ridge".into())),
    }
}

/// Contributions of one sampled subset: `(player, weight, marginal)`.
type SampleTerms = Vec<(usize, f64, Vec<f64>)>;

/// All-subsets influence estimate.
///
/// Each sample draws a size `k` uniformly from `0..N`, a uniform subset of
/// that size, fits ridge once, and records the influence marginal of every
/// absent player with weight `(N+1) / (2(N-k))`. The weight undoes the
/// `(N-k)/N` chance of a player being absent, so per player the prefix size
/// is uniform as in permutation sampling. Estimates are self-normalized.
pub fn decompose_all_s(
    spec: &ModelSpec,
    ds: &Dataset,
    split: &SplitPlan,
    cfg: &InfluenceConfig,
) -> Result<PhiMatrix> {
    let start = Instant::now();
    let (lambda, intercept) = ridge_params(spec)?;
    ds.check_indices(split.train())?;
    ds.check_indices(split.test())?;
    let train = split.train();
    let test = split.test();
    let n = train.len();
    let m = test.len();
    let samples = cfg.subset_samples.unwrap_or(2 * n);
    if samples == 0 {
        return Err(Error::invalid("subset_samples must be >= 1"));
    }
    let seed = derive_seed(cfg.seed, "influence_all_s");

    let (acc, wsum, full) = run_in_pool(cfg.threads, || -> Result<_> {
        let singletons: Vec<Vec<f64>> = if cfg.exact_singletons {
            (0..n)
                .into_par_iter()
                .map(|j| coalition_residuals(spec, ds, &[train[j]], test))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let one_sample = |r: usize| -> Result<SampleTerms> {
            let mut rng = stream_rng(seed, r as u64);
            let k = rng.random_range(0..n);
            let weight = (n + 1) as f64 / (2 * (n - k)) as f64;
            if k == 0 && cfg.exact_singletons {
                return Ok((0..n).map(|j| (j, weight, singletons[j].clone())).collect());
            }
            let mut members = vec![false; n];
            for j in index::sample(&mut rng, n, k) {
                members[j] = true;
            }
            let mut rows: Vec<usize> = (0..n).filter(|&j| members[j]).map(|j| train[j]).collect();
            rows.sort_unstable();
            let state = RidgeState::new(ds, &rows, lambda, intercept)?;
            Ok((0..n)
                .filter(|&j| !members[j])
                .map(|j| (j, weight, state.marginal_unchecked(ds, train[j], test)))
                .collect())
        };

        let mut acc = vec![0.0; n * m];
        let mut wsum = vec![0.0; n];
        let mut start = 0;
        while start < samples {
            let end = (start + CHUNK).min(samples);
            let chunk: Vec<SampleTerms> = (start..end)
                .into_par_iter()
                .map(one_sample)
                .collect::<Result<_>>()?;
            for terms in chunk {
                for (j, w, marg) in terms {
                    wsum[j] += w;
                    for (a, v) in acc[j * m..(j + 1) * m].iter_mut().zip(&marg) {
                        *a += w * v;
                    }
                }
            }
            start = end;
        }
        let full = coalition_residuals(spec, ds, train, test)?;
        Ok((acc, wsum, full))
    })??;

    if let Some(j) = wsum.iter().position(|&w| w == 0.0) {
        return Err(Error::invalid(format!(
            "training instance {} was never absent from a sampled subset; increase subset_samples",
            ds.id(train[j])
        )));
    }
    let values = DMatrix::from_fn(m, n, |i, j| acc[j * m + i] / wsum[j]);
    let mut meta = RunMeta::new("influence_all_s", cfg.seed, spec.clone());
    meta.permutations_used = samples;
    meta.converged = false;
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PhiMatrix {
        values,
        residuals_full: full,
        train_ids: train.iter().map(|&r| ds.id(r).to_string()).collect(),
        test_ids: test.iter().map(|&r| ds.id(r).to_string()).collect(),
        meta,
        std_errors: None,
    })
}

/// Single-fit influence estimate: `phi[i][j]` approximates the change in
/// `e_i` when `j` joins everyone else. Rows do not sum to the residuals.
pub fn decompose_largest_s(spec: &ModelSpec, ds: &Dataset, split: &SplitPlan) -> Result<PhiMatrix> {
    let start = Instant::now();
    let (lambda, intercept) = ridge_params(spec)?;
    ds.check_indices(split.test())?;
    let train = split.train();
    let test = split.test();
    let state = RidgeState::new(ds, train, lambda, intercept)?;
    let n = train.len();
    let m = test.len();
    let mut values = DMatrix::<f64>::zeros(m, n);
    for (j, &row) in train.iter().enumerate() {
        let col = state.marginal_unchecked(ds, row, test);
        for i in 0..m {
            values[(i, j)] = col[i];
        }
    }
    let full = test.iter().map(|&t| state.residual(ds, t)).collect();
    let mut meta = RunMeta::new("influence_largest_s", spec.fit_seed, spec.clone());
    meta.additivity_violated = true;
    meta.converged = false;
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PhiMatrix {
        values,
        residuals_full: full,
        train_ids: train.iter().map(|&r| ds.id(r).to_string()).collect(),
        test_ids: test.iter().map(|&r| ds.id(r).to_string()).collect(),
        meta,
        std_errors: None,
    })
}
