//! Repeated nested k-fold cross-validation.
//!
//! Per training fold, in order: fit the scaler on training rows only,
//! scale both sides, tune lambda by inner CV on the training fold alone
//! (regression on the logit scale, classification on the penalized
//! likelihood), select features, then fit one forest per mtry candidate
//! on the selected columns and predict the held-out fold. Forests train
//! on the raw share scale; the logit is only used for the LASSO stage,
//! and all reported metrics live on the share scale.
//!
//! Each sample is predicted exactly once per repetition, filling an
//! n x M matrix (M = hyperparameter count). The whole procedure repeats
//! R times over fresh fold partitions; reported metrics are means with
//! normal-approximation 95% confidence intervals over repetitions, and
//! feature selection counts accumulate over all R*k training fits.
//!
//! Every random stream derives from the master seed, so a report is a
//! pure function of (dataset, config) regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ResponseScale, Task};
use crate::error::{Error, Result};
use crate::folds::{make_folds, FoldAssignment};
use crate::forest::{fit_forest, predict_matrix, Forest, ForestConfig};
use crate::lasso::{
    lambda_grid, lasso_fit, logistic_lasso_fit, tune_lambda_cv, LassoFit, LassoSettings, LossKind,
};
use crate::matrix::Matrix;
use crate::metrics::{auc, pcc, pve};
use crate::preprocess::{apply_scaler, fit_scaler, logit_vec, ScalerParams};
use crate::rng::{derive_seed, seeded_rng};

/// Sentinel written into test-fold predictors by the leakage probe.
pub const LEAKAGE_PROBE_VALUE: f64 = 1e6;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TuneMetric {
    Pve,
    Pcc,
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoStage {
    pub inner_k: usize,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub solver: LassoSettings,
}

impl Default for LassoStage {
    fn default() -> Self {
        LassoStage {
            inner_k: 10,
            n_lambda: 100,
            lambda_ratio: 1e-3,
            solver: LassoSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestStage {
    pub n_trees: usize,
    /// None picks the task default (5 regression, 1 classification).
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestStage {
    fn default() -> Self {
        ForestStage {
            n_trees: 500,
            min_leaf: None,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub repetitions: usize,
    /// Candidate mtry values, ascending; clamped per fold to the
    /// selected feature count.
    pub mtry_grid: Vec<usize>,
    pub use_lasso_selection: bool,
    pub task: Task,
    pub master_seed: u64,
    pub tune_metric: TuneMetric,
    pub lasso: LassoStage,
    pub forest: ForestStage,
    /// Selection-frequency cutoff for the "most important" feature list.
    pub important_threshold: f64,
    /// Self-check: overwrite test-fold predictors with
    /// [`LEAKAGE_PROBE_VALUE`] before prediction. Training artifacts
    /// must be unaffected.
    pub leakage_probe: bool,
}

impl CvConfig {
    pub fn new(task: Task, p: usize, master_seed: u64) -> Self {
        CvConfig {
            k: 10,
            repetitions: 50,
            mtry_grid: default_mtry_grid(p),
            use_lasso_selection: true,
            task,
            master_seed,
            tune_metric: match task {
                Task::Regression => TuneMetric::Pve,
                Task::Classification => TuneMetric::Auc,
            },
            lasso: LassoStage::default(),
            forest: ForestStage::default(),
            important_threshold: 0.5,
            leakage_probe: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("need at least one repetition".into()));
        }
        if self.mtry_grid.is_empty() {
            return Err(Error::Config("mtry grid must not be empty".into()));
        }
        if self.mtry_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("mtry grid must be strictly ascending".into()));
        }
        if self.mtry_grid.contains(&0) {
            return Err(Error::Config("mtry values must be positive".into()));
        }
        if matches!(self.tune_metric, TuneMetric::Auc) != (self.task == Task::Classification) {
            return Err(Error::Config(
                "AUC tuning requires the classification task and vice versa".into(),
            ));
        }
        Ok(())
    }

    fn forest_config(&self, mtry: usize, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest.n_trees,
            mtry,
            min_leaf: self.forest.min_leaf.unwrap_or(match self.task {
                Task::Regression => 5,
                Task::Classification => 1,
            }),
            max_depth: self.forest.max_depth,
            bootstrap: self.forest.bootstrap,
            seed,
        }
    }
}

/// Default tuning grid {1, ceil(p/3), ceil(sqrt(p)), ceil(p/2), p},
/// deduplicated and ascending.
pub fn default_mtry_grid(p: usize) -> Vec<usize> {
    let mut grid = vec![
        1,
        p.div_ceil(3),
        (p as f64).sqrt().ceil() as usize,
        p.div_ceil(2),
        p,
    ];
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&m| m >= 1 && m <= p.max(1));
    grid
}

// ---------------------------------------------------------------------------
// Per-fold pipeline
// ---------------------------------------------------------------------------

/// Training-side artifacts of one fold, kept for reporting and for the
/// no-leakage instrumentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repetition: usize,
    pub fold: usize,
    pub scaler: ScalerParams,
    pub lambda: Option<f64>,
    /// Feature indices the LASSO stage selected (None when selection is
    /// disabled for the run).
    pub selected: Option<Vec<usize>>,
    pub zero_selection_fallback: bool,
    pub degenerate_class_fold: bool,
    pub forest_digests: Vec<u64>,
}

pub struct FoldOutput {
    /// One prediction vector per mtry candidate, aligned with the test
    /// rows.
    pub predictions: Vec<Vec<f64>>,
    pub record: FoldRecord,
}

fn selection_loss(task: Task) -> LossKind {
    match task {
        Task::Regression => LossKind::Squared,
        Task::Classification => LossKind::Logistic,
    }
}

/// Response the LASSO stage sees: logit of shares for share-scale
/// regression, otherwise the raw response.
fn selection_response(train: &Dataset) -> Result<Vec<f64>> {
    match (train.task, train.scale) {
        (Task::Regression, ResponseScale::Share) => logit_vec(&train.y),
        _ => Ok(train.y.clone()),
    }
}

fn fit_selection(
    x: &Matrix,
    y: &[f64],
    loss: LossKind,
    stage: &LassoStage,
    seed: u64,
) -> Result<(f64, LassoFit)> {
    let grid = lambda_grid(x, y, stage.n_lambda, stage.lambda_ratio, loss)?;
    let tuning = tune_lambda_cv(
        x,
        y,
        stage.inner_k.min(x.n_rows()),
        &grid,
        seed,
        loss,
        &stage.solver,
    )?;
    let fit = match loss {
        LossKind::Squared => lasso_fit(x, y, tuning.best_lambda, None, &stage.solver)?,
        LossKind::Logistic => logistic_lasso_fit(x, y, tuning.best_lambda, None, &stage.solver)?,
    };
    Ok((tuning.best_lambda, fit))
}

/// Run the full training pipeline on one fold and predict its test set.
///
/// `fold_seed` drives the inner-CV folds and the per-mtry forest
/// streams. No test-side value participates in any fitted quantity.
pub fn run_fold(
    train: &Dataset,
    test: &Dataset,
    config: &CvConfig,
    fold_seed: u64,
    repetition: usize,
    fold: usize,
) -> Result<FoldOutput> {
    let scaler = fit_scaler(&train.x)?;
    let x_train = apply_scaler(&train.x, &scaler)?;

    let mut test_x_raw = test.x.clone();
    if config.leakage_probe {
        test_x_raw.fill(LEAKAGE_PROBE_VALUE);
    }
    let x_test = apply_scaler(&test_x_raw, &scaler)?;

    let mut lambda = None;
    let mut selected: Option<Vec<usize>> = None;
    let mut zero_selection_fallback = false;
    let mut degenerate_class_fold = false;

    let mut active_columns: Vec<usize> = (0..train.p()).collect();
    if config.use_lasso_selection {
        let y_sel = selection_response(train)?;
        match fit_selection(
            &x_train,
            &y_sel,
            selection_loss(config.task),
            &config.lasso,
            derive_seed(fold_seed, "inner-cv", 0),
        ) {
            Ok((best_lambda, fit)) => {
                lambda = Some(best_lambda);
                selected = Some(fit.selected.clone());
                if fit.selected.is_empty() {
                    // An empty model cannot feed the forest; fall back
                    // to the full feature set and record the event.
                    zero_selection_fallback = true;
                } else {
                    active_columns = fit.selected;
                }
            }
            Err(Error::SingleClass) => {
                degenerate_class_fold = true;
                zero_selection_fallback = true;
            }
            Err(e) => return Err(e),
        }
    }

    let x_train_sel = x_train.select_columns(&active_columns);
    let x_test_sel = x_test.select_columns(&active_columns);
    let names_sel: Vec<String> = active_columns
        .iter()
        .map(|&j| train.feature_names[j].clone())
        .collect();

    let mut predictions = Vec::with_capacity(config.mtry_grid.len());
    let mut forest_digests = Vec::with_capacity(config.mtry_grid.len());
    for &mtry in &config.mtry_grid {
        let clamped = mtry.min(active_columns.len()).max(1);
        let forest_cfg =
            config.forest_config(clamped, derive_seed(fold_seed, "forest", mtry as u64));
        let forest: Forest =
            fit_forest(&x_train_sel, &train.y, &forest_cfg, config.task, &names_sel)?;
        forest_digests.push(forest.structure_digest());
        predictions.push(predict_matrix(&forest, &x_test_sel)?);
    }

    Ok(FoldOutput {
        predictions,
        record: FoldRecord {
            repetition,
            fold,
            scaler,
            lambda,
            selected,
            zero_selection_fallback,
            degenerate_class_fold,
            forest_digests,
        },
    })
}

// ---------------------------------------------------------------------------
// One repetition
// ---------------------------------------------------------------------------

/// Held-out predictions for every sample, one column per mtry value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub values: Matrix,
    pub mtry_values: Vec<usize>,
}

pub struct RunCvOutput {
    pub matrix: PredictionMatrix,
    pub folds: Vec<FoldRecord>,
    pub assignment: FoldAssignment,
}

/// One complete k-fold pass: every sample lands in exactly one test
/// fold and is predicted once per hyperparameter.
pub fn run_cv(
    dataset: &Dataset,
    config: &CvConfig,
    repetition_seed: u64,
    repetition: usize,
) -> Result<RunCvOutput> {
    dataset.validate()?;
    let n = dataset.n();
    let mut fold_rng = seeded_rng(derive_seed(repetition_seed, "folds", 0));
    let assignment = make_folds(n, config.k, &mut fold_rng)?;

    let mut values = Matrix::zeros(n, config.mtry_grid.len());
    let mut filled = vec![false; n];
    let mut folds = Vec::with_capacity(config.k);

    for fold in 0..config.k {
        let train_idx = assignment.train_indices(fold);
        let test_idx = assignment.test_indices(fold);
        let train = dataset.subset(&train_idx);
        let test = dataset.subset(&test_idx);
        let fold_seed = derive_seed(repetition_seed, "fold", fold as u64);
        let output = run_fold(&train, &test, config, fold_seed, repetition, fold)?;

        for (m, preds) in output.predictions.iter().enumerate() {
            for (local, &global) in test_idx.iter().enumerate() {
                values.set(global, m, preds[local]);
            }
        }
        for &global in &test_idx {
            debug_assert!(!filled[global], "sample predicted twice");
            filled[global] = true;
        }
        folds.push(output.record);
    }
    debug_assert!(filled.iter().all(|&f| f), "a sample was never held out");

    Ok(RunCvOutput {
        matrix: PredictionMatrix {
            values,
            mtry_values: config.mtry_grid.clone(),
        },
        folds,
        assignment,
    })
}

/// Score each hyperparameter column against the observed response and
/// return the winning index (ties toward the smaller mtry).
pub fn select_hyperparameter(
    matrix: &PredictionMatrix,
    y: &[f64],
    metric: TuneMetric,
) -> Result<(usize, Vec<f64>)> {
    let m = matrix.mtry_values.len();
    let mut scores = Vec::with_capacity(m);
    for col in 0..m {
        let preds = matrix.values.column(col);
        let score = match metric {
            TuneMetric::Pve => pve(y, &preds)?,
            TuneMetric::Pcc => pcc(y, &preds)?,
            TuneMetric::Auc => {
                let labels: Vec<bool> = y.iter().map(|&v| v == 1.0).collect();
                auc(&labels, &preds)?
            }
        };
        scores.push(score);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

// ---------------------------------------------------------------------------
// Repetition and reporting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub sd: f64,
}

impl MeanCi {
    fn from_samples(samples: &[f64]) -> MeanCi {
        let r = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / r;
        let sd = if samples.len() > 1 {
            (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * sd / r.sqrt();
        MeanCi {
            mean,
            lo: mean - half,
            hi: mean + half,
            sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSummary {
    pub mtry: usize,
    pub pcc: Option<MeanCi>,
    pub pve: Option<MeanCi>,
    pub auc: Option<MeanCi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub feature: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub season: String,
    pub kind: String,
    pub task: Task,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub use_lasso_selection: bool,
    pub mtry_grid: Vec<usize>,
    pub summaries: Vec<HyperparamSummary>,
    pub best_mtry_by_rep: Vec<usize>,
    /// Hyperparameter with the best mean tuning metric.
    pub best_mtry: usize,
    /// Per-feature counts over all repetitions x folds (empty when
    /// selection is disabled), sorted by frequency descending.
    pub selection_frequencies: Vec<SelectionFrequency>,
    /// Features selected in more than `important_threshold` of fits.
    pub most_important: Vec<String>,
    pub important_threshold: f64,
    pub selection_fits: usize,
    pub zero_selection_fallbacks: usize,
    pub degenerate_class_folds: usize,
    /// True when repetitions == 1 and the confidence interval collapses
    /// to the point estimate.
    pub ci_degenerate: bool,
    /// Held-out prediction matrices, one per repetition.
    pub prediction_matrices: Vec<PredictionMatrix>,
}

/// The full repeated protocol. Repetitions run in parallel over derived
/// seeds; the report is byte-stable for a fixed (dataset, config).
pub fn repeat_cv(dataset: &Dataset, config: &CvConfig) -> Result<CvReport> {
    config.validate()?;
    dataset.validate()?;
    let r = config.repetitions;

    let runs: Vec<RunCvOutput> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(config.master_seed, "repetition", rep as u64);
            run_cv(dataset, config, rep_seed, rep)
        })
        .collect::<Result<Vec<_>>>()?;

    let m = config.mtry_grid.len();
    let mut pcc_by_m: Vec<Vec<f64>> = vec![Vec::with_capacity(r); m];
    let mut pve_by_m: Vec<Vec<f64>> = vec![Vec::with_capacity(r); m];
    let mut auc_by_m: Vec<Vec<f64>> = vec![Vec::with_capacity(r); m];
    let mut best_mtry_by_rep = Vec::with_capacity(r);
    let mut selection_counts = vec![0usize; dataset.p()];
    let mut zero_fallbacks = 0;
    let mut degenerate = 0;

    for run in &runs {
        for col in 0..m {
            let preds = run.matrix.values.column(col);
            match config.task {
                Task::Regression => {
                    pcc_by_m[col].push(pcc(&dataset.y, &preds)?);
                    pve_by_m[col].push(pve(&dataset.y, &preds)?);
                }
                Task::Classification => {
                    let labels: Vec<bool> = dataset.y.iter().map(|&v| v == 1.0).collect();
                    auc_by_m[col].push(auc(&labels, &preds)?);
                }
            }
        }
        let (best, _) = select_hyperparameter(&run.matrix, &dataset.y, config.tune_metric)?;
        best_mtry_by_rep.push(config.mtry_grid[best]);

        for fold in &run.folds {
            if let Some(sel) = &fold.selected {
                for &j in sel {
                    selection_counts[j] += 1;
                }
            }
            zero_fallbacks += usize::from(fold.zero_selection_fallback);
            degenerate += usize::from(fold.degenerate_class_fold);
        }
    }

    let summaries: Vec<HyperparamSummary> = (0..m)
        .map(|col| HyperparamSummary {
            mtry: config.mtry_grid[col],
            pcc: (!pcc_by_m[col].is_empty()).then(|| MeanCi::from_samples(&pcc_by_m[col])),
            pve: (!pve_by_m[col].is_empty()).then(|| MeanCi::from_samples(&pve_by_m[col])),
            auc: (!auc_by_m[col].is_empty()).then(|| MeanCi::from_samples(&auc_by_m[col])),
        })
        .collect();

    let tune_means: Vec<f64> = summaries
        .iter()
        .map(|s| match config.tune_metric {
            TuneMetric::Pve => s.pve.as_ref().map(|c| c.mean).unwrap_or(f64::NEG_INFINITY),
            TuneMetric::Pcc => s.pcc.as_ref().map(|c| c.mean).unwrap_or(f64::NEG_INFINITY),
            TuneMetric::Auc => s.auc.as_ref().map(|c| c.mean).unwrap_or(f64::NEG_INFINITY),
        })
        .collect();
    let mut best_col = 0;
    for (i, &v) in tune_means.iter().enumerate() {
        if v > tune_means[best_col] {
            best_col = i;
        }
    }

    let selection_fits = r * config.k;
    let mut selection_frequencies: Vec<SelectionFrequency> = Vec::new();
    if config.use_lasso_selection {
        selection_frequencies = selection_counts
            .iter()
            .enumerate()
            .map(|(j, &count)| SelectionFrequency {
                feature: dataset.feature_names[j].clone(),
                count,
                frequency: count as f64 / selection_fits as f64,
            })
            .collect();
        selection_frequencies.sort_by(|a, b| {
            b.frequency
                .total_cmp(&a.frequency)
                .then(a.feature.cmp(&b.feature))
        });
    }
    let most_important: Vec<String> = selection_frequencies
        .iter()
        .filter(|s| s.frequency > config.important_threshold)
        .map(|s| s.feature.clone())
        .collect();

    Ok(CvReport {
        season: dataset.season.clone(),
        kind: dataset.kind.clone(),
        task: config.task,
        n: dataset.n(),
        p: dataset.p(),
        k: config.k,
        repetitions: r,
        master_seed: config.master_seed,
        use_lasso_selection: config.use_lasso_selection,
        mtry_grid: config.mtry_grid.clone(),
        summaries,
        best_mtry_by_rep,
        best_mtry: config.mtry_grid[best_col],
        selection_frequencies,
        most_important,
        important_threshold: config.important_threshold,
        selection_fits,
        zero_selection_fallbacks: zero_fallbacks,
        degenerate_class_folds: degenerate,
        ci_degenerate: r == 1,
        prediction_matrices: runs.into_iter().map(|run| run.matrix).collect(),
    })
}

impl CvReport {
    /// Human-readable per-run table: one row per mtry with mean metrics
    /// and 95% confidence intervals.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "### {} / {} ({:?}, {})\n\n",
            self.season,
            self.kind,
            self.task,
            if self.use_lasso_selection {
                "with selection"
            } else {
                "without selection"
            }
        ));
        out.push_str(&format!(
            "n = {}, p = {}, k = {}, repetitions = {}, seed = {}\n\n",
            self.n, self.p, self.k, self.repetitions, self.master_seed
        ));
        match self.task {
            Task::Regression => {
                out.push_str("| mtry | PCC (95% CI) | PVE (95% CI) |\n|---|---|---|\n");
                for s in &self.summaries {
                    let p = s.pcc.as_ref().unwrap();
                    let v = s.pve.as_ref().unwrap();
                    out.push_str(&format!(
                        "| {}{} | {:.3} [{:.3}, {:.3}] | {:.3} [{:.3}, {:.3}] |\n",
                        s.mtry,
                        if s.mtry == self.best_mtry { "*" } else { "" },
                        p.mean,
                        p.lo,
                        p.hi,
                        v.mean,
                        v.lo,
                        v.hi
                    ));
                }
            }
            Task::Classification => {
                out.push_str("| mtry | AUC (95% CI) |\n|---|---|\n");
                for s in &self.summaries {
                    let a = s.auc.as_ref().unwrap();
                    out.push_str(&format!(
                        "| {}{} | {:.3} [{:.3}, {:.3}] |\n",
                        s.mtry,
                        if s.mtry == self.best_mtry { "*" } else { "" },
                        a.mean,
                        a.lo,
                        a.hi
                    ));
                }
            }
        }
        if self.ci_degenerate {
            out.push_str("\nSingle repetition: intervals collapse to the point estimate.\n");
        }
        if self.use_lasso_selection {
            out.push_str(&format!(
                "\nMost frequently selected (frequency > {:.0}% of {} fits): {}\n",
                self.important_threshold * 100.0,
                self.selection_fits,
                if self.most_important.is_empty() {
                    "none".to_string()
                } else {
                    self.most_important.join(", ")
                }
            ));
            if self.zero_selection_fallbacks > 0 {
                out.push_str(&format!(
                    "Zero-selection fallbacks (full feature set used): {}\n",
                    self.zero_selection_fallbacks
                ));
            }
            if self.degenerate_class_folds > 0 {
                out.push_str(&format!(
                    "Degenerate single-class training folds: {}\n",
                    self.degenerate_class_folds
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn best_summary(&self) -> &HyperparamSummary {
        self.summaries
            .iter()
            .find(|s| s.mtry == self.best_mtry)
            .expect("best mtry is always a grid member")
    }
}
