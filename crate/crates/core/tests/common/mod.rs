//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's solvers: ridge is solved from the
//! uncentered normal equations with Gaussian elimination, and Shapley values
//! come from plain subset or permutation enumeration.

#![allow(dead_code)]

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Ridge with an unpenalized intercept, fit on `(xs[k], ys[k])` for `k` in
/// `rows`. Returns `(b0, theta)`.
pub fn ridge_fit(xs: &[Vec<f64>], ys: &[f64], rows: &[usize], lambda: f64, intercept: bool) -> (f64, Vec<f64>) {
    let p = xs[0].len();
    let off = usize::from(intercept);
    let d = p + off;
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for &r in rows {
        let mut z = Vec::with_capacity(d);
        if intercept {
            z.push(1.0);
        }
        z.extend_from_slice(&xs[r]);
        for i in 0..d {
            b[i] += z[i] * ys[r];
            for j in 0..d {
                a[i][j] += z[i] * z[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(off) {
        row[i] += lambda;
    }
    let sol = solve(a, b);
    if intercept {
        (sol[0], sol[1..].to_vec())
    } else {
        (0.0, sol)
    }
}

/// Test residuals of ridge fit on `coalition`; zeros for the empty set.
pub fn ridge_residuals(
    xs: &[Vec<f64>],
    ys: &[f64],
    coalition: &[usize],
    test: &[usize],
    lambda: f64,
    intercept: bool,
) -> Vec<f64> {
    if coalition.is_empty() {
        return vec![0.0; test.len()];
    }
    let (b0, theta) = ridge_fit(xs, ys, coalition, lambda, intercept);
    test.iter()
        .map(|&t| b0 + xs[t].iter().zip(&theta).map(|(x, w)| x * w).sum::<f64>() - ys[t])
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values of a vector game over `n` players by summing weighted
/// marginals over every subset. `value` receives coalitions as sorted
/// player lists. Returns `out[i][j]` for output `i`, player `j`.
pub fn shapley_by_subsets(n: usize, outputs: usize, value: impl Fn(&[usize]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let members = |mask: usize| (0..n).filter(|j| mask >> j & 1 == 1).collect::<Vec<_>>();
    let values: Vec<Vec<f64>> = (0..1usize << n).map(|mask| value(&members(mask))).collect();
    let mut out = vec![vec![0.0; n]; outputs];
    for j in 0..n {
        for mask in 0..1usize << n {
            if mask >> j & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = factorial(s) * factorial(n - s - 1) / factorial(n);
            for i in 0..outputs {
                out[i][j] += w * (values[mask | 1 << j][i] - values[mask][i]);
            }
        }
    }
    out
}

/// The same values by averaging marginals over all `n!` join orders.
pub fn shapley_by_permutations(n: usize, outputs: usize, value: impl Fn(&[usize]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; outputs];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0.0;
    loop {
        let mut prefix: Vec<usize> = Vec::new();
        let mut prev = value(&prefix);
        for &j in &perm {
            prefix.push(j);
            let mut sorted = prefix.clone();
            sorted.sort_unstable();
            let cur = value(&sorted);
            for i in 0..outputs {
                out[i][j] += cur[i] - prev[i];
            }
            prev = cur;
        }
        count += 1.0;
        // next lexicographic permutation
        let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| perm[k] < perm[k + 1]) else {
            break;
        };
        let l = (k + 1..n).rev().find(|&l| perm[k] < perm[l]).unwrap();
        perm.swap(k, l);
        perm[k + 1..].reverse();
    }
    for row in &mut out {
        for v in row.iter_mut() {
            *v /= count;
        }
    }
    out
}

/// Small deterministic generator so fixtures do not depend on the library's
/// seeding.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// `n` rows of `p` features in `[-1, 1]` with `y = sum(x) + noise`.
pub fn random_problem(seed: u64, n: usize, p: usize, noise: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut g = Lcg(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| g.uniform(-1.0, 1.0)).collect()).collect();
    let ys = xs.iter().map(|x| x.iter().sum::<f64>() + noise * g.uniform(-1.0, 1.0)).collect();
    (xs, ys)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &nalgebra::DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b[(i, j)]).abs());
        }
    }
    worst
}
