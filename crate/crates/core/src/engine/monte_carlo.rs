//! Truncated permutation sampling.
//!
//! Permutations come in blocks of `n` cyclic rotations of one seeded base
//! shuffle, so every player occupies every position exactly once per block.
//! Each rotation is still a uniformly distributed permutation. Permutation `t`
//! depends only on `(seed, t)`, and per-permutation marginals are folded in
//! index order, so results do not depend on the thread count.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{key_words, CachedGame};
use super::{default_threads, run_in_pool, CoalitionGame, ResidualGame};
use crate::dataio::{Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::phi::{PhiMatrix, RunMeta};
use crate::rng::{derive_seed, stream_rng};

/// Permutations evaluated concurrently before folding.
const BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Defaults to three times the number of players.
    pub max_permutations: Option<usize>,
    pub convergence_tol: f64,
    /// Clamped to `max_permutations`.
    pub convergence_window: usize,
    /// `None` picks the estimator's default; `Some(0.0)` disables truncation.
    pub truncation_tol: Option<f64>,
    pub seed: u64,
    pub threads: usize,
    pub cache_capacity: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            max_permutations: None,
            convergence_tol: 0.01,
            convergence_window: 100,
            truncation_tol: None,
            seed: 0,
            threads: default_threads(),
            cache_capacity: 10_000,
        }
    }
}

impl McConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn without_truncation(mut self) -> Self {
        self.truncation_tol = Some(0.0);
        self
    }

    pub fn permutations(mut self, n: usize) -> Self {
        self.max_permutations = Some(n);
        self
    }
}

/// Result of [`monte_carlo_shapley`], matrices shaped `outputs x players`.
#[derive(Debug, Clone)]
pub struct McOutcome {
    pub values: DMatrix<f64>,
    pub std_errors: DMatrix<f64>,
    pub permutations_used: usize,
    pub converged: bool,
    pub truncation_tol: f64,
}

fn permutation(n: usize, seed: u64, t: usize) -> Vec<usize> {
    let mut base: Vec<usize> = (0..n).collect();
    base.shuffle(&mut stream_rng(seed, (t / n) as u64));
    let r = t % n;
    (0..n).map(|k| base[(k + r) % n]).collect()
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

/// Marginals of one permutation, laid out column-major (`player * m + output`).
fn scan<G: CoalitionGame>(
    game: &CachedGame<'_, G>,
    perm: &[usize],
    m: usize,
    empty: &[f64],
    full: &[f64],
    trunc_tol: f64,
) -> Result<Vec<f64>> {
    let n = perm.len();
    let mut out = vec![0.0; n * m];
    let mut coalition: Vec<usize> = Vec::with_capacity(n);
    let mut key = vec![0u64; key_words(n)];
    let mut prev = empty.to_vec();
    for &player in perm {
        if trunc_tol > 0.0 && mean_abs_diff(&prev, full) < trunc_tol {
            break;
        }
        let at = coalition.binary_search(&player).unwrap_or_else(|e| e);
        coalition.insert(at, player);
        key[player / 64] |= 1 << (player % 64);
        let cur = game.value(&coalition, &key)?;
        for (o, (c, p)) in out[player * m..(player + 1) * m].iter_mut().zip(cur.iter().zip(&prev)) {
            *o = c - p;
        }
        prev = cur;
    }
    Ok(out)
}

/// Permutation-sampling Shapley estimate for a generic game.
///
/// `full` is the value of the grand coalition. Stops once the mean absolute
/// change of the estimate over the last `convergence_window` permutations,
/// relative to `mean|full - empty|`, falls below `convergence_tol`; checks
/// happen at block boundaries.
pub fn monte_carlo_shapley<G: CoalitionGame>(
    game: &G,
    full: &[f64],
    cfg: &McConfig,
    trunc_tol: f64,
) -> Result<McOutcome> {
    let n = game.players();
    let m = game.outputs();
    if n == 0 {
        return Err(Error::invalid("game has no players"));
    }
    let max_perms = cfg.max_permutations.unwrap_or(3 * n);
    if max_perms == 0 {
        return Err(Error::invalid("max_permutations must be >= 1"));
    }
    let window = cfg.convergence_window.clamp(1, max_perms);
    let empty = game.empty_value();
    let denom = mean_abs_diff(full, &empty);
    let perm_seed = derive_seed(cfg.seed, "mc_permutation");
    let cached = CachedGame::new(game, cfg.cache_capacity);

    let cells = n * m;
    let mut sum = vec![0.0; cells];
    let mut w_mean = vec![0.0; cells];
    let mut w_m2 = vec![0.0; cells];
    let mut count = 0usize;
    let mut snapshots: VecDeque<(usize, Vec<f64>)> = VecDeque::new();
    let mut converged = false;

    'outer: while count < max_perms {
        let end = (count + BATCH).min(max_perms);
        let batch: Vec<Vec<f64>> = (count..end)
            .into_par_iter()
            .map(|t| scan(&cached, &permutation(n, perm_seed, t), m, &empty, full, trunc_tol))
            .collect::<Result<_>>()?;
        for marg in batch {
            count += 1;
            let k = count as f64;
            for c in 0..cells {
                let x = marg[c];
                sum[c] += x;
                let d = x - w_mean[c];
                w_mean[c] += d / k;
                w_m2[c] += d * (x - w_mean[c]);
            }
            if count % n != 0 {
                continue;
            }
            snapshots.push_back((count, sum.clone()));
            if count < 2 * n {
                continue;
            }
            let reference = (count.saturating_sub(window) / n * n).max(n);
            while snapshots.front().is_some_and(|(t, _)| *t < reference) {
                snapshots.pop_front();
            }
            if let Some((t_ref, s_ref)) = snapshots.front() {
                let (t_ref, k_ref) = (*t_ref, *t_ref as f64);
                if t_ref < count {
                    let change = sum
                        .iter()
                        .zip(s_ref)
                        .map(|(a, b)| (a / k - b / k_ref).abs())
                        .sum::<f64>()
                        / cells as f64;
                    let rel = if denom > 0.0 { change / denom } else { change };
                    if rel < cfg.convergence_tol {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    let k = count as f64;
    let values = DMatrix::from_fn(m, n, |i, j| sum[j * m + i] / k);
    let std_errors = DMatrix::from_fn(m, n, |i, j| {
        if count < 2 {
            0.0
        } else {
            (w_m2[j * m + i] / (k - 1.0)).max(0.0).sqrt() / k.sqrt()
        }
    });
    Ok(McOutcome {
        values,
        std_errors,
        permutations_used: count,
        converged,
        truncation_tol: trunc_tol,
    })
}

/// Monte Carlo residual decomposition.
pub fn decompose_monte_carlo(
    spec: &ModelSpec,
    ds: &Dataset,
    split: &SplitPlan,
    cfg: &McConfig,
) -> Result<PhiMatrix> {
    let start = Instant::now();
    let game = ResidualGame::new(spec, ds, split)?;
    let trunc_tol = match cfg.truncation_tol {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::invalid(format!("truncation_tol {t} < 0"))),
        None => {
            let rms = (split.train().iter().map(|&r| ds.target(r).powi(2)).sum::<f64>()
                / split.train().len() as f64)
                .sqrt();
            0.001 * rms
        }
    };
    let all: Vec<usize> = (0..game.players()).collect();
    let (outcome, full) = run_in_pool(cfg.threads, || -> Result<_> {
        let full = game.value(&all)?;
        Ok((monte_carlo_shapley(&game, &full, cfg, trunc_tol)?, full))
    })??;
    let mut meta = RunMeta::new("monte_carlo", cfg.seed, spec.clone());
    meta.permutations_used = outcome.permutations_used;
    meta.truncation_tol = trunc_tol;
    meta.convergence_tol = cfg.convergence_tol;
    meta.converged = outcome.converged;
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PhiMatrix {
        values: outcome.values,
        residuals_full: full,
        train_ids: split.train().iter().map(|&r| ds.id(r).to_string()).collect(),
        test_ids: split.test().iter().map(|&r| ds.id(r).to_string()).collect(),
        meta,
        std_errors: Some(outcome.std_errors),
    })
}
