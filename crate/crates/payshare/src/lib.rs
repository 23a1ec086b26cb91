//! Salary-share analysis toolkit for professional basketball data.
//!
//! The pipeline predicts a player's share of his team's payroll from
//! on-court statistics: CSV snapshots are merged and cleaned, LASSO
//! picks the informative statistics on the logit scale, random forests
//! predict the share (or the low/high pay class), and a repeated nested
//! k-fold cross-validation protocol estimates out-of-sample performance
//! without letting test-fold information leak into any training-side
//! computation.
//!
//! Module map:
//! - [`ingest`]: CSV parsing, merging, cleaning, share construction
//! - [`preprocess`]: train-only standardization, logit transform
//! - [`lasso`]: coordinate-descent solvers, lambda tuning, KKT checks
//! - [`forest`]: CART random forests for regression and classification
//! - [`metrics`]: PCC, PVE, MSE, MAE, AUC
//! - [`kde`]: Gaussian kernel density estimates of share distributions
//! - [`folds`] / [`cv`]: the repeated nested cross-validation engine
//! - [`experiments`]: season-ahead validation, overfitting demos,
//!   synthetic data

pub mod cv;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod folds;
pub mod forest;
pub mod ingest;
pub mod kde;
pub mod lasso;
pub mod matrix;
pub mod metrics;
pub mod preprocess;
pub mod rng;

pub use dataset::{Dataset, ResponseScale, Task};
pub use error::{Error, Result};
pub use matrix::Matrix;
