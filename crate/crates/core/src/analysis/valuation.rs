use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, SplitPlan};
use crate::engine::{monte_carlo_shapley, CoalitionGame, McConfig};
use crate::error::{Error, Result};
use crate::models::{fit, ModelSpec};
use crate::phi::RunMeta;
use crate::rng::{derive_seed, stream_rng};

fn test_mse(spec: &ModelSpec, ds: &Dataset, rows: &[usize], test: &[usize]) -> Result<f64> {
    let model = fit(spec, ds, rows)?;
    Ok(test
        .iter()
        .map(|&t| (model.predict_row(ds.row(t)) - ds.target(t)).powi(2))
        .sum::<f64>()
        / test.len() as f64)
}

/// Scalar game `v(S) = -MSE_test(f_S)`, with the zero predictor for the
/// empty coalition.
struct LossGame<'a> {
    spec: &'a ModelSpec,
    ds: &'a Dataset,
    train: &'a [usize],
    test: &'a [usize],
}

impl CoalitionGame for LossGame<'_> {
    fn players(&self) -> usize {
        self.train.len()
    }

    fn outputs(&self) -> usize {
        1
    }

    fn value(&self, coalition: &[usize]) -> Result<Vec<f64>> {
        let rows: Vec<usize> = coalition.iter().map(|&k| self.train[k]).collect();
        Ok(vec![-test_mse(self.spec, self.ds, &rows, self.test)?])
    }

    fn empty_value(&self) -> Vec<f64> {
        vec![-self.test.iter().map(|&t| self.ds.target(t).powi(2)).sum::<f64>() / self.test.len() as f64]
    }

    fn fingerprint(&self) -> u64 {
        self.spec.fingerprint() ^ 0x6c6f_7373
    }
}

/// Data Shapley values of the training instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataShapley {
    pub values: Vec<f64>,
    pub v_full: f64,
    pub v_empty: f64,
    pub meta: RunMeta,
}

/// Permutation-sampling Shapley values of the test-loss game. The automatic
/// truncation tolerance is `0.001 * |v(full) - v(empty)|`.
pub fn data_shapley_values(spec: &ModelSpec, ds: &Dataset, split: &SplitPlan, cfg: &McConfig) -> Result<DataShapley> {
    let start = Instant::now();
    spec.validate()?;
    ds.check_indices(split.train())?;
    ds.check_indices(split.test())?;
    let game = LossGame {
        spec,
        ds,
        train: split.train(),
        test: split.test(),
    };
    let all: Vec<usize> = (0..game.players()).collect();
    let (outcome, full) = crate::engine::run_in_pool(cfg.threads, || -> Result<_> {
        let full = game.value(&all)?;
        let v_empty = game.empty_value()[0];
        let tol = match cfg.truncation_tol {
            Some(t) if t >= 0.0 => t,
            Some(t) => return Err(Error::invalid(format!("truncation_tol {t} < 0"))),
            None => 0.001 * (full[0] - v_empty).abs(),
        };
        Ok((monte_carlo_shapley(&game, &full, cfg, tol)?, full))
    })??;
    let mut meta = RunMeta::new("data_shapley", cfg.seed, spec.clone());
    meta.permutations_used = outcome.permutations_used;
    meta.truncation_tol = outcome.truncation_tol;
    meta.convergence_tol = cfg.convergence_tol;
    meta.converged = outcome.converged;
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(DataShapley {
        values: outcome.values.row(0).iter().copied().collect(),
        v_full: full[0],
        v_empty: game.empty_value()[0],
        meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    RemoveHigh,
    RemoveLow,
    Random,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::RemoveHigh => "remove_high",
            Direction::RemoveLow => "remove_low",
            Direction::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub removed: usize,
    pub mse: f64,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str = "removed,mse,direction,ranking_name";

    pub fn csv_row(&self, direction: Direction, ranking_name: &str) -> String {
        format!("{},{},{},{}", self.removed, self.mse, direction.as_str(), ranking_name)
    }
}

fn curve(spec: &ModelSpec, ds: &Dataset, order: &[usize], test: &[usize], steps: usize) -> Result<Vec<f64>> {
    (0..=steps)
        .into_par_iter()
        .map(|s| {
            let mut rest = order[s..].to_vec();
            rest.sort_unstable();
            test_mse(spec, ds, &rest, test)
        })
        .collect()
}

/// Test MSE after removing `0..=steps` training instances in ranking order,
/// or in a random order per seed (averaged over `seeds`).
pub fn ablation_curve(
    spec: &ModelSpec,
    ds: &Dataset,
    split: &SplitPlan,
    ranking: &[f64],
    direction: Direction,
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    spec.validate()?;
    let train = split.train();
    let test = split.test();
    ds.check_indices(train)?;
    ds.check_indices(test)?;
    if steps >= train.len() {
        return Err(Error::invalid(format!(
            "steps {steps} would leave no training instances (N = {})",
            train.len()
        )));
    }
    let mses = match direction {
        Direction::RemoveHigh | Direction::RemoveLow => {
            if ranking.len() != train.len() {
                return Err(Error::DimensionMismatch {
                    expected: train.len(),
                    actual: ranking.len(),
                });
            }
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.sort_by(|&a, &b| {
                let c = ranking[a].total_cmp(&ranking[b]);
                let c = if direction == Direction::RemoveHigh { c.reverse() } else { c };
                c.then(a.cmp(&b))
            });
            let rows: Vec<usize> = order.into_iter().map(|k| train[k]).collect();
            curve(spec, ds, &rows, test, steps)?
        }
        Direction::Random => {
            if seeds.is_empty() {
                return Err(Error::invalid("random ablation needs at least one seed"));
            }
            let mut acc = vec![0.0; steps + 1];
            for &seed in seeds {
                let mut rows = train.to_vec();
                rows.shuffle(&mut stream_rng(derive_seed(seed, "ablation_random"), 0));
                for (a, m) in acc.iter_mut().zip(curve(spec, ds, &rows, test, steps)?) {
                    *a += m;
                }
            }
            acc.into_iter().map(|a| a / seeds.len() as f64).collect()
        }
    };
    Ok(mses
        .into_iter()
        .enumerate()
        .map(|(removed, mse)| AblationRow { removed, mse })
        .collect())
}
