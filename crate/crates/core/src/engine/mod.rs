//! Coalition valuation and Shapley estimation over training instances.
//!
//! A training instance is a player; the value of a coalition is the vector of
//! residuals `f_S(x_i) - y_i` over the evaluation rows for a model fit on the
//! coalition alone. The empty coalition is worth the zero vector, so every
//! permutation telescopes to the full-model residuals.

mod cache;
mod monte_carlo;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataio::{Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::models::{fit, ModelSpec};
use crate::phi::{PhiMatrix, RunMeta};

pub use monte_carlo::{decompose_monte_carlo, monte_carlo_shapley, McConfig, McOutcome};

/// Default cap on players for exact enumeration.
pub const EXACT_MAX_PLAYERS: usize = 14;

/// A cooperative game with vector-valued payoffs.
pub trait CoalitionGame: Sync {
    fn players(&self) -> usize;

    /// Length of the payoff vector.
    fn outputs(&self) -> usize;

    /// Value of a non-empty coalition given as ascending player indices.
    fn value(&self, coalition: &[usize]) -> Result<Vec<f64>>;

    fn empty_value(&self) -> Vec<f64> {
        vec![0.0; self.outputs()]
    }

    /// Identifies the game in cache keys.
    fn fingerprint(&self) -> u64 {
        0
    }
}

/// Players are the training rows of a split; payoffs are test residuals.
pub struct ResidualGame<'a> {
    spec: &'a ModelSpec,
    ds: &'a Dataset,
    train: &'a [usize],
    test: &'a [usize],
}

impl<'a> ResidualGame<'a> {
    pub fn new(spec: &'a ModelSpec, ds: &'a Dataset, split: &'a SplitPlan) -> Result<Self> {
        spec.validate()?;
        ds.check_indices(split.train())?;
        ds.check_indices(split.test())?;
        Ok(Self {
            spec,
            ds,
            train: split.train(),
            test: split.test(),
        })
    }
}

impl CoalitionGame for ResidualGame<'_> {
    fn players(&self) -> usize {
        self.train.len()
    }

    fn outputs(&self) -> usize {
        self.test.len()
    }

    fn value(&self, coalition: &[usize]) -> Result<Vec<f64>> {
        let rows: Vec<usize> = coalition.iter().map(|&k| self.train[k]).collect();
        let model = fit(self.spec, self.ds, &rows)?;
        Ok(self
            .test
            .iter()
            .map(|&t| model.predict_row(self.ds.row(t)) - self.ds.target(t))
            .collect())
    }

    fn fingerprint(&self) -> u64 {
        self.spec.fingerprint()
    }
}

/// Residuals on `test_indices` of a model fit on the dataset rows in
/// `coalition`; the zero vector when the coalition is empty.
pub fn coalition_residuals(
    spec: &ModelSpec,
    ds: &Dataset,
    coalition: &[usize],
    test_indices: &[usize],
) -> Result<Vec<f64>> {
    if test_indices.is_empty() {
        return Err(Error::invalid("no test indices"));
    }
    ds.check_indices(test_indices)?;
    ds.check_indices(coalition)?;
    if coalition.is_empty() {
        return Ok(vec![0.0; test_indices.len()]);
    }
    let model = fit(spec, ds, coalition)?;
    Ok(test_indices
        .iter()
        .map(|&t| model.predict_row(ds.row(t)) - ds.target(t))
        .collect())
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Shapley weight `s! (n - s - 1)! / n!` of a coalition of size `s` not
/// containing the player, among `n` players.
pub fn shapley_weight(n: usize, s: usize) -> Result<f64> {
    if n == 0 || s >= n {
        return Err(Error::invalid(format!(
            "coalition size {s} out of range for {n} players"
        )));
    }
    let lf = ln_factorials(n);
    Ok((lf[s] + lf[n - s - 1] - lf[n]).exp())
}

pub(crate) fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Exact Shapley values of `game` by enumerating all `2^n` coalitions.
/// Returns an `outputs x players` matrix. Each coalition is valued once.
pub fn exact_shapley<G: CoalitionGame>(game: &G, max_players: usize) -> Result<DMatrix<f64>> {
    let n = game.players();
    if n > max_players || n >= 63 {
        return Err(Error::CapExceeded {
            players: n,
            cap: max_players.min(62),
        });
    }
    if n == 0 {
        return Err(Error::invalid("game has no players"));
    }
    let m = game.outputs();
    let total = 1usize << n;
    let empty = game.empty_value();
    let rest: Vec<Vec<f64>> = (1..total)
        .into_par_iter()
        .map(|mask| {
            let coalition: Vec<usize> = (0..n).filter(|&k| mask >> k & 1 == 1).collect();
            game.value(&coalition)
        })
        .collect::<Result<_>>()?;
    let value = |mask: usize| -> &[f64] {
        if mask == 0 {
            &empty
        } else {
            &rest[mask - 1]
        }
    };

    let lf = ln_factorials(n);
    let weights: Vec<f64> = (0..n).map(|s| (lf[s] + lf[n - s - 1] - lf[n]).exp()).collect();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let bit = 1usize << j;
            let mut col = vec![0.0; m];
            for mask in (0..total).filter(|mask| mask & bit == 0) {
                let w = weights[mask.count_ones() as usize];
                let with = value(mask | bit);
                let without = value(mask);
                for i in 0..m {
                    col[i] += w * (with[i] - without[i]);
                }
            }
            col
        })
        .collect();
    Ok(DMatrix::from_fn(m, n, |i, j| columns[j][i]))
}

/// Settings for exact enumeration.
#[derive(Debug, Clone)]
pub struct ExactConfig {
    pub max_players: usize,
    pub threads: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            max_players: EXACT_MAX_PLAYERS,
            threads: default_threads(),
        }
    }
}

/// Exact residual decomposition with the default cap.
pub fn decompose_exact(spec: &ModelSpec, ds: &Dataset, split: &SplitPlan) -> Result<PhiMatrix> {
    decompose_exact_with(spec, ds, split, &ExactConfig::default())
}

pub fn decompose_exact_with(
    spec: &ModelSpec,
    ds: &Dataset,
    split: &SplitPlan,
    cfg: &ExactConfig,
) -> Result<PhiMatrix> {
    let start = Instant::now();
    let game = ResidualGame::new(spec, ds, split)?;
    let all: Vec<usize> = (0..game.players()).collect();
    let (values, residuals_full) = run_in_pool(cfg.threads, || -> Result<_> {
        Ok((exact_shapley(&game, cfg.max_players)?, game.value(&all)?))
    })??;
    let mut meta = RunMeta::new("exact", spec.fit_seed, spec.clone());
    meta.permutations_used = 0;
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PhiMatrix {
        values,
        residuals_full,
        train_ids: split.train().iter().map(|&r| ds.id(r).to_string()).collect(),
        test_ids: split.test().iter().map(|&r| ds.id(r).to_string()).collect(),
        meta,
        std_errors: None,
    })
}
