//! Closed-form ridge regression on standardized features.
//!
//! Features are standardized with per-column mean and sample standard
//! deviation, the target is centered, and the intercept is the target mean
//! (never penalized). The normal equations are solved with a Cholesky
//! factorization, in whichever of the primal (d×d) or dual (n×n) form is
//! smaller; both yield the same minimizer for λ > 0.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

// Relative pivot floor below which an unregularized system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Per-column mean and sample standard deviation. Constant columns get scale 1.
pub fn standardize_fit<R: AsRef<[f64]>>(x: &[R]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, d) = shape(x)?;
    let mut means = vec![0.0; d];
    for row in x {
        for (m, v) in means.iter_mut().zip(row.as_ref()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    let scales = (0..d)
        .map(|j| {
            if is_constant(x, j) || n < 2 {
                return 1.0;
            }
            let ss: f64 = x.iter().map(|r| (r.as_ref()[j] - means[j]).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect();
    Ok((means, scales))
}

fn is_constant<R: AsRef<[f64]>>(x: &[R], j: usize) -> bool {
    let first = x[0].as_ref()[j];
    x.iter().all(|r| r.as_ref()[j] == first)
}

fn shape<R: AsRef<[f64]>>(x: &[R]) -> Result<(usize, usize)> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyInput("feature matrix has no rows"));
    }
    let d = x[0].as_ref().len();
    if d == 0 {
        return Err(Error::EmptyInput("feature matrix has no columns"));
    }
    for row in x {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    Ok((n, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub schema_version: u32,
    pub lambda: f64,
    #[serde(default)]
    pub feature_config: Option<FeatureConfig>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        let mut acc = self.intercept;
        for (((v, m), s), w) in x.iter().zip(&self.means).zip(&self.scales).zip(&self.weights) {
            acc += (v - m) / s * w;
        }
        Ok(acc)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: RidgeModel = serde_json::from_str(text)?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model schema_version {}",
                model.schema_version
            )));
        }
        let d = model.weights.len();
        if model.means.len() != d || model.scales.len() != d {
            return Err(Error::InvalidInput("model vectors have inconsistent lengths".into()));
        }
        if model.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("model scales must be positive".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

enum Gram {
    /// ZᵀZ, d×d
    Primal(DMatrix<f64>),
    /// ZZᵀ, n×n
    Dual(DMatrix<f64>),
}

/// A standardized regression problem that can be solved for many λ values.
pub struct RidgeProblem {
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    /// Columns with non-zero variance; the rest keep weight exactly 0.
    active: Vec<usize>,
    z: DMatrix<f64>,
    yc: DVector<f64>,
    gram: Gram,
    n_features: usize,
}

impl RidgeProblem {
    pub fn new<R: AsRef<[f64]>>(x: &[R], y: &[f64]) -> Result<Self> {
        let (n, d) = shape(x)?;
        if y.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite target value".into()));
        }
        let (means, scales) = standardize_fit(x)?;
        let active: Vec<usize> = (0..d).filter(|&j| !is_constant(x, j)).collect();
        let z = DMatrix::from_fn(n, active.len(), |i, k| {
            let j = active[k];
            (x[i].as_ref()[j] - means[j]) / scales[j]
        });
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = if active.len() <= n {
            Gram::Primal(z.tr_mul(&z))
        } else {
            Gram::Dual(&z * z.transpose())
        };
        Ok(Self {
            means,
            scales,
            y_mean,
            active,
            z,
            yc,
            gram,
            n_features: d,
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<RidgeModel> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        let mut weights = vec![0.0; self.n_features];
        if !self.active.is_empty() {
            let w = if lambda == 0.0 {
                // Unregularized: always the primal system, so rank deficiency surfaces.
                let a = match &self.gram {
                    Gram::Primal(g) => g.clone(),
                    Gram::Dual(_) => self.z.tr_mul(&self.z),
                };
                let chol = factor(a, lambda)?;
                chol.solve(&self.z.tr_mul(&self.yc))
            } else {
                match &self.gram {
                    Gram::Primal(g) => factor(shifted(g, lambda), lambda)?.solve(&self.z.tr_mul(&self.yc)),
                    Gram::Dual(g) => {
                        let alpha = factor(shifted(g, lambda), lambda)?.solve(&self.yc);
                        self.z.tr_mul(&alpha)
                    }
                }
            };
            for (k, &j) in self.active.iter().enumerate() {
                weights[j] = w[k];
            }
        }
        Ok(RidgeModel {
            schema_version: MODEL_SCHEMA_VERSION,
            lambda,
            feature_config: None,
            means: self.means.clone(),
            scales: self.scales.clone(),
            weights,
            intercept: self.y_mean,
        })
    }
}

fn shifted(g: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let mut a = g.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    a
}

fn factor(a: DMatrix<f64>, lambda: f64) -> Result<Cholesky<f64, Dyn>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = Cholesky::new(a).ok_or(Error::SingularSystem { lambda })?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > SINGULAR_PIVOT * max_diag) {
        return Err(Error::SingularSystem { lambda });
    }
    Ok(chol)
}

pub fn ridge_fit<R: AsRef<[f64]>>(x: &[R], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    RidgeProblem::new(x, y)?.solve(lambda)
}

pub fn ridge_predict<R: AsRef<[f64]>>(model: &RidgeModel, x: &[R]) -> Result<Vec<f64>> {
    x.iter().map(|row| model.predict_one(row.as_ref())).collect()
}
