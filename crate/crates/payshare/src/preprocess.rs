//! Predictor standardization and the logit transform of the share
//! response.
//!
//! Scaling statistics are always fitted on training rows only and then
//! applied to held-out rows; constant training columns are flagged and
//! zeroed instead of erroring so that degenerate folds cannot abort a
//! long cross-validation run. Missing cells (NaN) are skipped when
//! fitting and map to 0 after scaling, i.e. to the training-column mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column means and standard deviations fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    /// Sample (n-1 denominator) standard deviations; constant columns
    /// carry the sentinel 1.0 and are flagged below.
    pub sds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl ScalerParams {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Fit per-column scaling statistics on training rows only.
///
/// NaN cells are excluded from the statistics; a column with fewer than
/// two observed values (or zero variance) is flagged constant.
pub fn fit_scaler(train: &Matrix) -> Result<ScalerParams> {
    if train.n_rows() < 2 {
        return Err(Error::InvalidInput(format!(
            "scaler needs at least 2 training rows, got {}",
            train.n_rows()
        )));
    }
    let p = train.n_cols();
    let mut means = vec![0.0; p];
    let mut sds = vec![1.0; p];
    let mut constant = vec![false; p];
    for j in 0..p {
        let observed: Vec<f64> = (0..train.n_rows())
            .map(|i| train.get(i, j))
            .filter(|v| !v.is_nan())
            .collect();
        if observed.len() < 2 {
            constant[j] = true;
            means[j] = observed.first().copied().unwrap_or(0.0);
            continue;
        }
        let n = observed.len() as f64;
        let mean = observed.iter().sum::<f64>() / n;
        let var = observed
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        means[j] = mean;
        if var <= 0.0 {
            constant[j] = true;
        } else {
            sds[j] = var.sqrt();
        }
    }
    Ok(ScalerParams {
        means,
        sds,
        constant,
    })
}

/// Standardize a matrix with previously fitted statistics.
///
/// Constant-flagged columns become all zeros; NaN cells map to 0 (the
/// training mean).
pub fn apply_scaler(m: &Matrix, params: &ScalerParams) -> Result<Matrix> {
    if m.n_cols() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, scaler expects {}",
            m.n_cols(),
            params.len()
        )));
    }
    let mut out = Matrix::zeros(m.n_rows(), m.n_cols());
    for i in 0..m.n_rows() {
        for j in 0..m.n_cols() {
            let x = m.get(i, j);
            let v = if params.constant[j] || x.is_nan() {
                0.0
            } else {
                (x - params.means[j]) / params.sds[j]
            };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// log(y / (1 - y)); defined for y strictly inside (0, 1).
pub fn logit(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidInput(format!(
            "logit requires 0 < y < 1, got {y}"
        )));
    }
    Ok((y / (1.0 - y)).ln())
}

/// 1 / (1 + e^(-x)); saturates without producing NaN for extreme inputs.
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logit of a response vector.
pub fn logit_vec(y: &[f64]) -> Result<Vec<f64>> {
    y.iter().map(|&v| logit(v)).collect()
}
