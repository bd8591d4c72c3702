//! Shapley-kernel weighted least squares over sampled coalitions.
//!
//! The base value is fixed at zero (the empty coalition is worth nothing) and
//! the efficiency constraint `sum_j phi_ij = v_i(full)` is imposed exactly by
//! eliminating the last player's coefficient. One design matrix and one QR
//! factorization serve every test instance as a separate right-hand side.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rayon::prelude::*;

use crate::dataio::{Dataset, SplitPlan};
use crate::engine::{run_in_pool, CoalitionGame, ResidualGame};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::phi::{PhiMatrix, RunMeta};
use crate::rng::{derive_seed, stream_rng};

/// A coalition with its regression weight and how often it was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMask {
    pub mask: Vec<bool>,
    pub weight: f64,
    pub multiplicity: usize,
}

impl WeightedMask {
    pub fn size(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    fn members(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&j| self.mask[j]).collect()
    }
}

/// A valued coalition: mask, weight and the residual vector it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSample {
    pub mask: Vec<bool>,
    pub weight: f64,
    pub value: Vec<f64>,
}

fn ln_binom(n: usize, k: usize) -> f64 {
    let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Shapley kernel `(M - 1) / (C(M, s) * s * (M - s))`.
pub fn kernel_weight(players: usize, size: usize) -> Result<f64> {
    if size == 0 || size >= players {
        return Err(Error::invalid(format!(
            "kernel weight undefined for size {size} of {players} players"
        )));
    }
    let (m, s) = (players as f64, size as f64);
    Ok(((m - 1.0).ln() - ln_binom(players, size) - s.ln() - (m - s).ln()).exp())
}

/// Draws coalitions for the kernel regression.
///
/// Sizes follow the kernel's size marginal `(M-1)/(s(M-s))`, members are
/// uniform given the size, and every draw also adds its complement. Repeats
/// are merged. When `budget >= 2^M - 2` every proper non-empty coalition is
/// returned once, weighted by the kernel.
pub fn sample_coalitions(players: usize, budget: usize, seed: u64) -> Result<Vec<WeightedMask>> {
    if budget < 2 {
        return Err(Error::invalid("coalition budget must be >= 2"));
    }
    if players < 2 {
        return Ok(Vec::new());
    }
    if players < 63 && budget as u128 >= (1u128 << players) - 2 {
        return (1u64..(1u64 << players) - 1)
            .map(|bits| {
                let mask: Vec<bool> = (0..players).map(|j| bits >> j & 1 == 1).collect();
                Ok(WeightedMask {
                    weight: kernel_weight(players, bits.count_ones() as usize)?,
                    mask,
                    multiplicity: 1,
                })
            })
            .collect();
    }

    let m = players as f64;
    let size_mass: Vec<f64> = (1..players)
        .map(|s| (m - 1.0) / (s as f64 * (m - s as f64)))
        .collect();
    let normalizer: f64 = size_mass.iter().sum();
    let sizes = WeightedIndex::new(&size_mass).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = stream_rng(derive_seed(seed, "kernel_masks"), 0);

    let mut out: Vec<WeightedMask> = Vec::new();
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut add = |mask: Vec<bool>, out: &mut Vec<WeightedMask>| match seen.get(&mask) {
        Some(&i) => out[i].multiplicity += 1,
        None => {
            seen.insert(mask.clone(), out.len());
            out.push(WeightedMask {
                mask,
                weight: 0.0,
                multiplicity: 1,
            });
        }
    };
    for _ in 0..budget.div_ceil(2) {
        let size = sizes.sample(&mut rng) + 1;
        let mut mask = vec![false; players];
        for j in index::sample(&mut rng, players, size) {
            mask[j] = true;
        }
        let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
        add(mask, &mut out);
        add(complement, &mut out);
    }
    // kernel / draw probability is the same constant for every mask
    for w in &mut out {
        w.weight = w.multiplicity as f64 * normalizer;
    }
    Ok(out)
}

/// Solves the constrained regression for every column of `values`.
/// Returns `players x outputs` coefficients.
fn constrained_wls(
    samples: &[MaskSample],
    full: &[f64],
    players: usize,
) -> Result<DMatrix<f64>> {
    let outputs = full.len();
    if players == 1 {
        return Ok(DMatrix::from_row_slice(1, outputs, full));
    }
    let free = players - 1;
    let last = players - 1;
    let rows = samples.len();
    if rows < free {
        return Err(Error::Singular(format!(
            "{rows} distinct coalitions cannot determine {players} values"
        )));
    }
    let mut a = DMatrix::<f64>::zeros(rows, free);
    let mut b = DMatrix::<f64>::zeros(rows, outputs);
    for (r, s) in samples.iter().enumerate() {
        let sw = s.weight.sqrt();
        let z_last = if s.mask[last] { 1.0 } else { 0.0 };
        for j in 0..free {
            let z = if s.mask[j] { 1.0 } else { 0.0 };
            a[(r, j)] = sw * (z - z_last);
        }
        for i in 0..outputs {
            b[(r, i)] = sw * (s.value[i] - z_last * full[i]);
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..free).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..free).any(|j| r[(j, j)].abs() <= 1e-10 * diag_max.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(
            "sampled coalitions do not span every player; increase the budget".into(),
        ));
    }
    let qtb = qr.q().transpose() * b;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let mut out = DMatrix::<f64>::zeros(players, outputs);
    for i in 0..outputs {
        let mut acc = 0.0;
        for j in 0..free {
            out[(j, i)] = x[(j, i)];
            acc += x[(j, i)];
        }
        out[(last, i)] = full[i] - acc;
    }
    Ok(out)
}

/// Kernel estimate of the residual decomposition.
pub fn decompose_kernel(
    spec: &ModelSpec,
    ds: &Dataset,
    split: &SplitPlan,
    budget: usize,
    seed: u64,
    threads: usize,
) -> Result<PhiMatrix> {
    let start = Instant::now();
    let game = ResidualGame::new(spec, ds, split)?;
    let n = game.players();
    if budget < n.max(2) {
        return Err(Error::invalid(format!(
            "kernel budget {budget} is below the {n} training instances"
        )));
    }
    let masks = sample_coalitions(n, budget, seed)?;
    let all: Vec<usize> = (0..n).collect();
    let (samples, full) = run_in_pool(threads, || -> Result<_> {
        let samples: Vec<MaskSample> = masks
            .par_iter()
            .map(|w| {
                Ok(MaskSample {
                    value: game.value(&w.members())?,
                    mask: w.mask.clone(),
                    weight: w.weight,
                })
            })
            .collect::<Result<_>>()?;
        Ok((samples, game.value(&all)?))
    })??;
    let coef = constrained_wls(&samples, &full, n)?;
    let mut meta = RunMeta::new("kernel", seed, spec.clone());
    meta.permutations_used = masks.iter().map(|m| m.multiplicity).sum();
    meta.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(PhiMatrix {
        values: coef.transpose(),
        residuals_full: full,
        train_ids: split.train().iter().map(|&r| ds.id(r).to_string()).collect(),
        test_ids: split.test().iter().map(|&r| ds.id(r).to_string()).collect(),
        meta,
        std_errors: None,
    })
}
