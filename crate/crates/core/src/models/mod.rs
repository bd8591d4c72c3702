//! Regressors that can be fit on any non-empty subset of a dataset's rows.

mod forest;
mod ridge;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::rng::{fnv1a, hash_indices, mix64};

pub use forest::Forest;
pub use ridge::{ridge_system, RidgeFit};

/// Which regressor to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Ridge {
        lambda: f64,
        /// Fit an unpenalized intercept on centered data.
        intercept: bool,
    },
    Forest {
        trees: usize,
        min_leaf: usize,
        feature_fraction: f64,
    },
    Constant {
        value: f64,
    },
}

/// Declarative description of a regressor plus the seed for its randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub fit_seed: u64,
}

impl ModelSpec {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: ModelKind::Ridge {
                lambda,
                intercept: true,
            },
            fit_seed: 0,
        }
    }

    /// Ridge through the origin.
    pub fn ridge_no_intercept(lambda: f64) -> Self {
        Self {
            kind: ModelKind::Ridge {
                lambda,
                intercept: false,
            },
            fit_seed: 0,
        }
    }

    /// 100 trees, one-sample leaves, a third of the features per split.
    pub fn forest(fit_seed: u64) -> Self {
        Self {
            kind: ModelKind::Forest {
                trees: 100,
                min_leaf: 1,
                feature_fraction: 1.0 / 3.0,
            },
            fit_seed,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            kind: ModelKind::Constant { value },
            fit_seed: 0,
        }
    }

    pub fn with_seed(mut self, fit_seed: u64) -> Self {
        self.fit_seed = fit_seed;
        self
    }

    pub fn is_ridge(&self) -> bool {
        matches!(self.kind, ModelKind::Ridge { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Ridge { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::invalid(format!("ridge lambda must be > 0, got {lambda}")))
            }
            ModelKind::Forest {
                trees,
                min_leaf,
                feature_fraction,
            } if trees == 0 || min_leaf == 0 || !(feature_fraction > 0.0 && feature_fraction <= 1.0) => {
                Err(Error::invalid(
                    "forest needs trees >= 1, min_leaf >= 1 and feature_fraction in (0, 1]",
                ))
            }
            ModelKind::Constant { value } if !value.is_finite() => {
                Err(Error::invalid("constant value must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Stable hash of the spec, used in cache keys.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).unwrap_or_default();
        mix64(fnv1a(json.as_bytes()))
    }
}

#[derive(Debug, Clone)]
enum Params {
    Ridge(RidgeFit),
    Forest(Forest),
    Constant(f64),
}

/// A model fit on a specific subset. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedModel {
    spec: ModelSpec,
    params: Params,
    train_subset: Vec<usize>,
    p: usize,
}

/// Fits `spec` on the rows `subset` of `ds`.
///
/// Randomness (forests only) is seeded from `fit_seed` and the sorted subset,
/// so refitting the same coalition reproduces the same model bit for bit.
pub fn fit(spec: &ModelSpec, ds: &Dataset, subset: &[usize]) -> Result<FittedModel> {
    if subset.is_empty() {
        return Err(Error::invalid("cannot fit a model on an empty subset"));
    }
    ds.check_indices(subset)?;
    spec.validate()?;
    let params = match spec.kind {
        ModelKind::Ridge { lambda, intercept } => {
            Params::Ridge(RidgeFit::fit(ds, subset, lambda, intercept)?)
        }
        ModelKind::Forest {
            trees,
            min_leaf,
            feature_fraction,
        } => {
            let mut sorted = subset.to_vec();
            sorted.sort_unstable();
            let seed = mix64(spec.fit_seed ^ hash_indices(&sorted));
            Params::Forest(Forest::fit(
                ds,
                &sorted,
                trees,
                min_leaf,
                feature_fraction,
                seed,
            ))
        }
        ModelKind::Constant { value } => Params::Constant(value),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        params,
        train_subset: subset.to_vec(),
        p: ds.p(),
    })
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn train_subset(&self) -> &[usize] {
        &self.train_subset
    }

    /// Ridge coefficients and intercept, if this is a ridge model.
    pub fn ridge(&self) -> Option<&RidgeFit> {
        match &self.params {
            Params::Ridge(r) => Some(r),
            _ => None,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.params {
            Params::Ridge(r) => r.predict_row(x),
            Params::Forest(f) => f.predict_row(x),
            Params::Constant(c) => *c,
        }
    }

    /// Predictions for dataset rows.
    pub fn predict_rows(&self, ds: &Dataset, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.predict_row(ds.row(r))).collect()
    }

    /// Predictions for an arbitrary feature matrix with one row per sample.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: x.ncols(),
            });
        }
        let mut buf = vec![0.0; self.p];
        Ok((0..x.nrows())
            .map(|r| {
                for (c, b) in buf.iter_mut().enumerate() {
                    *b = x[(r, c)];
                }
                self.predict_row(&buf)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synthesize_linear;

    fn one_d(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::from_rows(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn ridge_single_point_closed_form() {
        let ds = one_d(&[1.0], &[1.0]);
        let m = fit(&ModelSpec::ridge_no_intercept(1.0), &ds, &[0]).unwrap();
        let r = m.ridge().unwrap();
        assert!((r.theta()[0] - 0.5).abs() < 1e-15);
        assert_eq!(r.intercept(), 0.0);
        let pred = m.predict(&DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        assert!((pred[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_with_intercept_on_singleton_predicts_target() {
        let ds = one_d(&[1.0, 5.0], &[3.0, 0.0]);
        let m = fit(&ModelSpec::ridge(1.0), &ds, &[0]).unwrap();
        assert_eq!(m.predict_row(&[5.0]), 3.0);
    }

    #[test]
    fn constant_predicts_value() {
        let ds = one_d(&[1.0, 2.0], &[1.0, 2.0]);
        let m = fit(&ModelSpec::constant(3.5), &ds, &[1]).unwrap();
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(m.predict(&x).unwrap(), vec![3.5; 4]);
        let zero = fit(&ModelSpec::constant(0.0), &ds, &[0, 1]).unwrap();
        assert_eq!(zero.predict_rows(&ds, &[0, 1]), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_and_empty_subset() {
        let ds = one_d(&[1.0], &[1.0]);
        let m = fit(&ModelSpec::ridge(1.0), &ds, &[0]).unwrap();
        assert!(m.predict(&DMatrix::zeros(1, 2)).is_err());
        assert!(fit(&ModelSpec::ridge(1.0), &ds, &[]).is_err());
        assert!(fit(&ModelSpec::ridge(1.0), &ds, &[3]).is_err());
        assert!(fit(&ModelSpec::ridge(0.0), &ds, &[0]).is_err());
    }

    #[test]
    fn forest_is_reproducible() {
        let ds = synthesize_linear(40, 3, 0.1, 4).unwrap();
        let subset: Vec<usize> = (0..30).collect();
        let spec = ModelSpec::forest(11);
        let a = fit(&spec, &ds, &subset).unwrap();
        let b = fit(&spec, &ds, &subset).unwrap();
        let mut shuffled = subset.clone();
        shuffled.reverse();
        let c = fit(&spec, &ds, &shuffled).unwrap();
        let probe: Vec<usize> = (0..40).collect();
        assert_eq!(a.predict_rows(&ds, &probe), b.predict_rows(&ds, &probe));
        assert_eq!(a.predict_rows(&ds, &probe), c.predict_rows(&ds, &probe));
    }

    #[test]
    fn forest_on_single_point_predicts_its_target() {
        let ds = one_d(&[0.3, -2.0], &[4.25, 1.0]);
        let m = fit(&ModelSpec::forest(1), &ds, &[0]).unwrap();
        for x in [-10.0, 0.0, 0.3, 7.0] {
            assert_eq!(m.predict_row(&[x]), 4.25);
        }
    }

    #[test]
    fn forest_beats_constant_on_noise_free_data() {
        let ds = synthesize_linear(60, 2, 0.0, 9).unwrap();
        let all: Vec<usize> = (0..60).collect();
        let spec = ModelSpec {
            kind: ModelKind::Forest {
                trees: 50,
                min_leaf: 1,
                feature_fraction: 1.0,
            },
            fit_seed: 3,
        };
        let f = fit(&spec, &ds, &all).unwrap();
        let mean = ds.targets().iter().sum::<f64>() / 60.0;
        let mse = |pred: &[f64]| {
            pred.iter()
                .zip(ds.targets())
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / 60.0
        };
        let forest_mse = mse(&f.predict_rows(&ds, &all));
        let const_mse = mse(&vec![mean; 60]);
        assert!(forest_mse <= const_mse, "{forest_mse} > {const_mse}");
    }

    #[test]
    fn fingerprint_separates_specs() {
        assert_ne!(ModelSpec::ridge(1.0).fingerprint(), ModelSpec::ridge(2.0).fingerprint());
        assert_eq!(ModelSpec::ridge(1.0).fingerprint(), ModelSpec::ridge(1.0).fingerprint());
    }
}
