use nalgebra::{DMatrix, DVector};

use crate::dataio::Dataset;
use crate::error::{Error, Result};

/// Closed-form ridge solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    theta: Vec<f64>,
    intercept: f64,
}

/// Regularized normal equations `(Xc^T Xc + lambda I) theta = Xc^T yc` over
/// `rows`, where `Xc`, `yc` are centered on the subset means when `intercept`
/// is set. Returns the system and the means used for centering.
pub fn ridge_system(
    ds: &Dataset,
    rows: &[usize],
    lambda: f64,
    intercept: bool,
) -> (DMatrix<f64>, DVector<f64>, Vec<f64>, f64) {
    let p = ds.p();
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    if intercept && !rows.is_empty() {
        let m = rows.len() as f64;
        for &r in rows {
            for (acc, v) in x_mean.iter_mut().zip(ds.row(r)) {
                *acc += v;
            }
            y_mean += ds.target(r);
        }
        x_mean.iter_mut().for_each(|v| *v /= m);
        y_mean /= m;
    }
    let mut a = DMatrix::<f64>::identity(p, p) * lambda;
    let mut b = DVector::<f64>::zeros(p);
    let mut xc = vec![0.0; p];
    for &r in rows {
        for ((c, v), mu) in xc.iter_mut().zip(ds.row(r)).zip(&x_mean) {
            *c = v - mu;
        }
        let yc = ds.target(r) - y_mean;
        for j in 0..p {
            b[j] += xc[j] * yc;
            for k in 0..=j {
                a[(j, k)] += xc[j] * xc[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(k, j)] = a[(j, k)];
        }
    }
    (a, b, x_mean, y_mean)
}

impl RidgeFit {
    pub fn fit(ds: &Dataset, rows: &[usize], lambda: f64, intercept: bool) -> Result<Self> {
        let (a, b, x_mean, y_mean) = ridge_system(ds, rows, lambda, intercept);
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Singular("ridge Gram matrix is not positive definite".into()))?;
        let theta = chol.solve(&b);
        let icpt = if intercept {
            y_mean - theta.iter().zip(&x_mean).map(|(t, m)| t * m).sum::<f64>()
        } else {
            0.0
        };
        Ok(Self {
            theta: theta.iter().copied().collect(),
            intercept: icpt,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
    }
}
