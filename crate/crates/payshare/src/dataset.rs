//! Shared dataset vocabulary: a design matrix with named columns plus a
//! response vector, tagged with the prediction task and response scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Classification,
}

/// Whether a regression response is a payroll share in (0,1) (LASSO
/// selection then runs on the logit scale) or an unconstrained value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseScale {
    Share,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub season: String,
    /// Statistics family label, e.g. "per-game"; free-form for
    /// synthetic data.
    pub kind: String,
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub task: Task,
    pub scale: ResponseScale,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.n_rows()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.x.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows vs {} responses",
                self.x.n_rows(),
                self.y.len()
            )));
        }
        if self.feature_names.len() != self.x.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature names vs {} columns",
                self.feature_names.len(),
                self.x.n_cols()
            )));
        }
        match self.task {
            Task::Classification => {
                if self.y.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidInput(
                        "classification response must be 0/1".into(),
                    ));
                }
            }
            Task::Regression => {
                if self.scale == ResponseScale::Share
                    && self.y.iter().any(|&v| !(v > 0.0 && v < 1.0))
                {
                    return Err(Error::InvalidInput(
                        "share response must lie strictly inside (0,1)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Row subset preserving all metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            season: self.season.clone(),
            kind: self.kind.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            task: self.task,
            scale: self.scale,
        }
    }
}
