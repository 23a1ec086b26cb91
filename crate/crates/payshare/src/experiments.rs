//! Validation experiments: season-ahead prediction, internal-vs-external
//! evaluation contrasts, the pure-noise overfitting demonstrator, and
//! the synthetic data generator behind the acceptance checks.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cv::LassoStage;
use crate::dataset::{Dataset, ResponseScale, Task};
use crate::error::{Error, Result};
use crate::folds::make_folds;
use crate::forest::{fit_forest, predict_matrix, ForestConfig};
use crate::lasso::{lambda_grid, lasso_fit, predict_linear, tune_lambda_cv, LossKind};
use crate::matrix::Matrix;
use crate::metrics::{auc, pcc, pve};
use crate::preprocess::{apply_scaler, fit_scaler, inv_logit, logit_vec};
use crate::rng::{derive_seed, seeded_rng};

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticForm {
    Linear,
    /// Sin/step mixtures over the support features.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub support: Vec<usize>,
    pub form: SyntheticForm,
    pub noise_sd: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Response before noise; the generator's ground truth.
    pub noiseless: Vec<f64>,
    /// Coefficients per support feature (linear form only).
    pub true_coefficients: Option<Vec<f64>>,
}

fn linear_coefficient(slot: usize) -> f64 {
    let magnitude = 2.5 * 0.85f64.powi(slot as i32);
    if slot.is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

fn nonlinear_term(slot: usize, x: f64) -> f64 {
    match slot % 4 {
        0 => 2.0 * (2.0 * x).sin(),
        1 => {
            if x > 0.25 {
                1.4
            } else {
                -1.0
            }
        }
        2 => 1.6 * (3.0 * x).sin(),
        _ => {
            if x > -0.5 {
                0.9
            } else {
                -1.3
            }
        }
    }
}

/// Standard-normal design with a planted response over the support.
pub fn synthetic_generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.support.iter().any(|&j| j >= spec.p) {
        return Err(Error::InvalidInput(format!(
            "support index out of range for p = {}",
            spec.p
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let mut rows = Vec::with_capacity(spec.n);
    let mut noiseless = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let row: Vec<f64> = (0..spec.p).map(|_| rng.sample(StandardNormal)).collect();
        let signal: f64 = spec
            .support
            .iter()
            .enumerate()
            .map(|(slot, &j)| match spec.form {
                SyntheticForm::Linear => linear_coefficient(slot) * row[j],
                SyntheticForm::Nonlinear => nonlinear_term(slot, row[j]),
            })
            .sum();
        noiseless.push(signal);
        y.push(signal + rng.sample::<f64, _>(StandardNormal) * spec.noise_sd);
        rows.push(row);
    }
    let dataset = Dataset {
        season: format!("synthetic-{}", spec.seed),
        kind: "synthetic".into(),
        feature_names: (0..spec.p).map(|j| format!("x{j}")).collect(),
        x: Matrix::from_rows(rows)?,
        y,
        task: Task::Regression,
        scale: ResponseScale::Raw,
    };
    let true_coefficients = match spec.form {
        SyntheticForm::Linear => Some((0..spec.support.len()).map(linear_coefficient).collect()),
        SyntheticForm::Nonlinear => None,
    };
    Ok(SyntheticData {
        dataset,
        noiseless,
        true_coefficients,
    })
}

// ---------------------------------------------------------------------------
// External evaluation helpers (single-model k-fold CV)
// ---------------------------------------------------------------------------

/// Externally cross-validated PVE of a forest alone (no selection).
pub fn forest_external_pve(
    dataset: &Dataset,
    forest_template: &ForestConfig,
    k: usize,
    seed: u64,
) -> Result<f64> {
    dataset.validate()?;
    let mut rng = seeded_rng(derive_seed(seed, "forest-cv", 0));
    let assignment = make_folds(dataset.n(), k, &mut rng)?;
    let mut predictions = vec![0.0; dataset.n()];
    for fold in 0..k {
        let train_idx = assignment.train_indices(fold);
        let test_idx = assignment.test_indices(fold);
        let train = dataset.subset(&train_idx);
        let test = dataset.subset(&test_idx);
        let scaler = fit_scaler(&train.x)?;
        let x_train = apply_scaler(&train.x, &scaler)?;
        let x_test = apply_scaler(&test.x, &scaler)?;
        let cfg = ForestConfig {
            mtry: forest_template.mtry.min(dataset.p()).max(1),
            seed: derive_seed(seed, "forest-fold", fold as u64),
            ..forest_template.clone()
        };
        let forest = fit_forest(
            &x_train,
            &train.y,
            &cfg,
            Task::Regression,
            &train.feature_names,
        )?;
        for (local, &global) in test_idx.iter().enumerate() {
            predictions[global] = predict_matrix(&forest, &x_test)?[local];
        }
    }
    pve(&dataset.y, &predictions)
}

/// Externally cross-validated PVE of a tuned LASSO alone. Share-scale
/// responses are fitted on the logit scale and predictions
/// back-transformed before scoring.
pub fn lasso_external_pve(
    dataset: &Dataset,
    stage: &LassoStage,
    k: usize,
    seed: u64,
) -> Result<f64> {
    dataset.validate()?;
    let share_scale = dataset.scale == ResponseScale::Share;
    let mut rng = seeded_rng(derive_seed(seed, "lasso-cv", 0));
    let assignment = make_folds(dataset.n(), k, &mut rng)?;
    let mut predictions = vec![0.0; dataset.n()];
    for fold in 0..k {
        let train_idx = assignment.train_indices(fold);
        let test_idx = assignment.test_indices(fold);
        let train = dataset.subset(&train_idx);
        let test = dataset.subset(&test_idx);
        let scaler = fit_scaler(&train.x)?;
        let x_train = apply_scaler(&train.x, &scaler)?;
        let x_test = apply_scaler(&test.x, &scaler)?;
        let y_fit = if share_scale {
            logit_vec(&train.y)?
        } else {
            train.y.clone()
        };
        let grid = lambda_grid(
            &x_train,
            &y_fit,
            stage.n_lambda,
            stage.lambda_ratio,
            LossKind::Squared,
        )?;
        let tuning = tune_lambda_cv(
            &x_train,
            &y_fit,
            stage.inner_k.min(x_train.n_rows()),
            &grid,
            derive_seed(seed, "lasso-inner", fold as u64),
            LossKind::Squared,
            &stage.solver,
        )?;
        let fit = lasso_fit(&x_train, &y_fit, tuning.best_lambda, None, &stage.solver)?;
        let raw = predict_linear(&x_test, &fit);
        for (local, &global) in test_idx.iter().enumerate() {
            predictions[global] = if share_scale {
                inv_logit(raw[local])
            } else {
                raw[local]
            };
        }
    }
    pve(&dataset.y, &predictions)
}

// ---------------------------------------------------------------------------
// Internal (optimistic) evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalEvalReport {
    pub forest_pve: f64,
    pub forest_pcc: f64,
    pub lasso_pve: f64,
    pub selected_features: Vec<String>,
}

/// The optimistic protocol: standardize everything up front, tune and
/// select on the full data, fit on the full data, then score the models
/// on the very rows they saw. Exists to quantify how misleading that
/// number is next to a cross-validated one.
pub fn internal_evaluation(
    dataset: &Dataset,
    stage: &LassoStage,
    forest_template: &ForestConfig,
    seed: u64,
) -> Result<InternalEvalReport> {
    dataset.validate()?;
    if dataset.task != Task::Regression {
        return Err(Error::InvalidInput(
            "internal evaluation is a regression demonstration".into(),
        ));
    }
    let share_scale = dataset.scale == ResponseScale::Share;
    let scaler = fit_scaler(&dataset.x)?;
    let x = apply_scaler(&dataset.x, &scaler)?;
    let y_fit = if share_scale {
        logit_vec(&dataset.y)?
    } else {
        dataset.y.clone()
    };

    let grid = lambda_grid(
        &x,
        &y_fit,
        stage.n_lambda,
        stage.lambda_ratio,
        LossKind::Squared,
    )?;
    let tuning = tune_lambda_cv(
        &x,
        &y_fit,
        stage.inner_k.min(x.n_rows()),
        &grid,
        derive_seed(seed, "internal-inner", 0),
        LossKind::Squared,
        &stage.solver,
    )?;
    let lasso = lasso_fit(&x, &y_fit, tuning.best_lambda, None, &stage.solver)?;
    let lasso_raw = predict_linear(&x, &lasso);
    let lasso_preds: Vec<f64> = if share_scale {
        lasso_raw.iter().map(|&v| inv_logit(v)).collect()
    } else {
        lasso_raw
    };

    let columns = if lasso.selected.is_empty() {
        (0..dataset.p()).collect::<Vec<_>>()
    } else {
        lasso.selected.clone()
    };
    let x_sel = x.select_columns(&columns);
    let names: Vec<String> = columns
        .iter()
        .map(|&j| dataset.feature_names[j].clone())
        .collect();
    let cfg = ForestConfig {
        mtry: forest_template.mtry.min(columns.len()).max(1),
        seed: derive_seed(seed, "internal-forest", 0),
        ..forest_template.clone()
    };
    let forest = fit_forest(&x_sel, &dataset.y, &cfg, Task::Regression, &names)?;
    let forest_preds = predict_matrix(&forest, &x_sel)?;

    Ok(InternalEvalReport {
        forest_pve: pve(&dataset.y, &forest_preds)?,
        forest_pcc: pcc(&dataset.y, &forest_preds)?,
        lasso_pve: pve(&dataset.y, &lasso_preds)?,
        selected_features: names,
    })
}

// ---------------------------------------------------------------------------
// Season-ahead validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonAheadReport {
    pub task: Task,
    pub train_season: String,
    pub test_season: String,
    pub n_train: usize,
    pub n_test: usize,
    pub selected_features: Vec<String>,
    pub pve: Option<f64>,
    pub pcc: Option<f64>,
    pub auc: Option<f64>,
    /// Per-row predictions for the validation season (share scale or
    /// class-1 probability), aligned with its rows.
    pub predictions: Vec<f64>,
}

/// Fit on all of season t over the given feature columns and predict
/// season t+1, which is never touched before prediction. The scaler and
/// every other fitted quantity come from season t alone.
pub fn season_ahead_validation(
    train: &Dataset,
    test: &Dataset,
    selected_features: &[String],
    forest_template: &ForestConfig,
    seed: u64,
) -> Result<SeasonAheadReport> {
    train.validate()?;
    test.validate()?;
    if train.task != test.task {
        return Err(Error::InvalidInput(
            "train and validation seasons disagree on the task".into(),
        ));
    }
    if selected_features.is_empty() {
        return Err(Error::InvalidInput("no selected features given".into()));
    }
    let mut train_cols = Vec::with_capacity(selected_features.len());
    let mut test_cols = Vec::with_capacity(selected_features.len());
    for name in selected_features {
        let ti = train
            .feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| {
                Error::InvalidInput(format!("train season lacks selected column {name}"))
            })?;
        let vi = test
            .feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| {
                Error::InvalidInput(format!("validation season lacks selected column {name}"))
            })?;
        train_cols.push(ti);
        test_cols.push(vi);
    }

    let x_train_raw = train.x.select_columns(&train_cols);
    let x_test_raw = test.x.select_columns(&test_cols);
    let scaler = fit_scaler(&x_train_raw)?;
    let x_train = apply_scaler(&x_train_raw, &scaler)?;
    let x_test = apply_scaler(&x_test_raw, &scaler)?;

    let cfg = ForestConfig {
        mtry: forest_template.mtry.min(train_cols.len()).max(1),
        seed: derive_seed(seed, "season-ahead", 0),
        ..forest_template.clone()
    };
    let forest = fit_forest(
        &x_train,
        &train.y,
        &cfg,
        train.task,
        selected_features.to_vec().as_slice(),
    )?;
    let predictions = predict_matrix(&forest, &x_test)?;

    let (pve_v, pcc_v, auc_v) = match train.task {
        Task::Regression => (
            Some(pve(&test.y, &predictions)?),
            Some(pcc(&test.y, &predictions)?),
            None,
        ),
        Task::Classification => {
            let labels: Vec<bool> = test.y.iter().map(|&v| v == 1.0).collect();
            (None, None, Some(auc(&labels, &predictions)?))
        }
    };

    Ok(SeasonAheadReport {
        task: train.task,
        train_season: train.season.clone(),
        test_season: test.season.clone(),
        n_train: train.n(),
        n_test: test.n(),
        selected_features: selected_features.to_vec(),
        pve: pve_v,
        pcc: pcc_v,
        auc: auc_v,
        predictions,
    })
}

// ---------------------------------------------------------------------------
// Overfitting demonstrator on pure noise
// ---------------------------------------------------------------------------

pub const DEFAULT_DEMO_LEVELS: [usize; 9] = [1, 2, 3, 4, 5, 6, 8, 10, 12];

/// Which flexible in-repo fitter the demonstrator cranks up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemoFitter {
    /// Complexity level = maximum tree depth of a small forest.
    ForestDepth,
    /// Complexity level = number of greedy hinge basis terms.
    HingeBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResult {
    pub complexity_levels: Vec<usize>,
    pub internal_pcc: Vec<f64>,
    pub external_pve: Vec<f64>,
    pub fitter: DemoFitter,
}

impl DemoResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,internal_pcc,external_pve\n");
        for i in 0..self.complexity_levels.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.complexity_levels[i], self.internal_pcc[i], self.external_pve[i]
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "Internal correlation climbs with model complexity on pure noise while \
             cross-validated variance explained stays at zero; scoring a model on its \
             own training data says nothing about prediction. Complexity knob: {}.\n\n\
             | complexity | internal PCC | external PVE |\n|---|---|---|\n",
            match self.fitter {
                DemoFitter::ForestDepth => "forest depth",
                DemoFitter::HingeBasis => "hinge basis terms",
            }
        );
        for i in 0..self.complexity_levels.len() {
            out.push_str(&format!(
                "| {} | {:.3} | {:.3} |\n",
                self.complexity_levels[i], self.internal_pcc[i], self.external_pve[i]
            ));
        }
        out
    }
}

/// A single hinge basis term: coef * max(0, +/-(x_j - knot)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HingeTerm {
    feature: usize,
    knot: f64,
    positive: bool,
    coef: f64,
}

/// Greedy forward regression over hinge bases: the in-repo flexible
/// fitter whose capacity is the number of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeModel {
    intercept: f64,
    terms: Vec<HingeTerm>,
}

impl HingeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut v = self.intercept;
        for t in &self.terms {
            let h = if t.positive {
                (row[t.feature] - t.knot).max(0.0)
            } else {
                (t.knot - row[t.feature]).max(0.0)
            };
            v += t.coef * h;
        }
        v
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }
}

fn column_quantiles(values: &mut [f64], count: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    (1..=count)
        .map(|q| {
            let pos = q as f64 / (count + 1) as f64 * (values.len() - 1) as f64;
            values[pos.round() as usize]
        })
        .collect()
}

fn hinge_values(x: &Matrix, term: &HingeTerm) -> Vec<f64> {
    (0..x.n_rows())
        .map(|i| {
            let v = x.get(i, term.feature);
            if term.positive {
                (v - term.knot).max(0.0)
            } else {
                (term.knot - v).max(0.0)
            }
        })
        .collect()
}

/// Plain Gauss elimination for the final refit; the system is tiny
/// (n_terms + 1 square).
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    for pivot in 0..m {
        let best = (pivot..m)
            .max_by(|&r1, &r2| a[r1][pivot].abs().total_cmp(&a[r2][pivot].abs()))
            .unwrap();
        a.swap(pivot, best);
        b.swap(pivot, best);
        let d = a[pivot][pivot];
        if d.abs() < 1e-12 {
            continue; // dependent column; leave its coefficient at zero
        }
        for c in pivot..m {
            a[pivot][c] /= d;
        }
        b[pivot] /= d;
        for r in 0..m {
            if r != pivot && a[r][pivot] != 0.0 {
                let f = a[r][pivot];
                for c in pivot..m {
                    a[r][c] -= f * a[pivot][c];
                }
                b[r] -= f * b[pivot];
            }
        }
    }
    b
}

/// Greedy forward fit with refitting: each stage adds the hinge whose
/// component orthogonal to the fitted span removes the most residual
/// variance, then all coefficients are re-estimated jointly by least
/// squares. Refitting is what lets the model chase noise hard enough to
/// look impressive on its own training data.
pub fn fit_greedy_hinges(
    x: &Matrix,
    y: &[f64],
    n_terms: usize,
    knots_per_feature: usize,
) -> HingeModel {
    let n = x.n_rows();
    let nf = n as f64;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut residual: Vec<f64> = y.iter().map(|v| v - mean_y).collect();

    let knots: Vec<Vec<f64>> = (0..x.n_cols())
        .map(|j| column_quantiles(&mut x.column(j), knots_per_feature))
        .collect();

    // Precompute every centered candidate once; `orth_sq` tracks the
    // squared norm of each candidate's component orthogonal to the
    // selected span and shrinks as terms enter the model.
    struct Candidate {
        term: HingeTerm,
        values: Vec<f64>,
        orth_sq: f64,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for (feature, feature_knots) in knots.iter().enumerate() {
        for &knot in feature_knots {
            for positive in [true, false] {
                let term = HingeTerm {
                    feature,
                    knot,
                    positive,
                    coef: 0.0,
                };
                let mut values = hinge_values(x, &term);
                let mean = values.iter().sum::<f64>() / nf;
                for v in values.iter_mut() {
                    *v -= mean;
                }
                let var: f64 = values.iter().map(|v| v * v).sum();
                if var > 1e-10 {
                    candidates.push(Candidate {
                        term,
                        values,
                        orth_sq: var,
                    });
                }
            }
        }
    }

    let mut q_basis: Vec<Vec<f64>> = Vec::with_capacity(n_terms);
    let mut terms: Vec<HingeTerm> = Vec::with_capacity(n_terms);

    for _ in 0..n_terms.min(candidates.len()) {
        let res_var: f64 = residual.iter().map(|r| r * r).sum();
        if res_var <= 1e-20 {
            break;
        }
        // The residual is orthogonal to the fitted span, so h.r equals
        // the orthogonal component's covariance and the removal a
        // candidate offers is (h.r)^2 / |h_orth|^2.
        let mut best: Option<(f64, usize)> = None;
        for (idx, cand) in candidates.iter().enumerate() {
            if cand.orth_sq < 1e-8 {
                continue;
            }
            let cov: f64 = cand.values.iter().zip(&residual).map(|(a, b)| a * b).sum();
            let removal = cov * cov / cand.orth_sq;
            if best.is_none_or(|(b, _)| removal > b) {
                best = Some((removal, idx));
            }
        }
        let Some((_, idx)) = best else { break };
        let term = candidates[idx].term.clone();

        // Orthogonalize the winner against the selected span.
        let mut q = candidates[idx].values.clone();
        for prev in &q_basis {
            let proj: f64 = q.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (v, pv) in q.iter_mut().zip(prev) {
                *v -= proj * pv;
            }
        }
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            break; // dictionary exhausted within the selected span
        }
        for v in q.iter_mut() {
            *v /= norm;
        }
        let coef: f64 = q.iter().zip(&residual).map(|(a, b)| a * b).sum();
        for (r, v) in residual.iter_mut().zip(&q) {
            *r -= coef * v;
        }
        for cand in candidates.iter_mut() {
            let d: f64 = cand.values.iter().zip(&q).map(|(a, b)| a * b).sum();
            cand.orth_sq = (cand.orth_sq - d * d).max(0.0);
        }
        q_basis.push(q);
        terms.push(term);
    }

    // Final joint refit of intercept plus all selected hinges.
    let m = terms.len() + 1;
    let mut design: Vec<Vec<f64>> = Vec::with_capacity(m);
    design.push(vec![1.0; n]);
    for term in &terms {
        design.push(hinge_values(x, term));
    }
    let mut normal = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        for c in r..m {
            let v: f64 = design[r].iter().zip(&design[c]).map(|(a, b)| a * b).sum();
            normal[r][c] = v;
            normal[c][r] = v;
        }
        rhs[r] = design[r].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let solution = solve_dense(normal, rhs);
    for (term, &coef) in terms.iter_mut().zip(&solution[1..]) {
        term.coef = coef;
    }
    HingeModel {
        intercept: solution[0],
        terms,
    }
}

const DEMO_KNOTS: usize = 20;
const DEMO_TREES: usize = 40;

/// Generate pure-noise data and trace internal correlation vs external
/// variance explained as the fitter's complexity grows.
pub fn leakage_demo(
    n: usize,
    p: usize,
    complexity_levels: &[usize],
    seed: u64,
    fitter: DemoFitter,
) -> Result<DemoResult> {
    if complexity_levels.is_empty() {
        return Err(Error::InvalidInput("no complexity levels given".into()));
    }
    if complexity_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "complexity levels must be strictly increasing".into(),
        ));
    }
    let mut rng = seeded_rng(derive_seed(seed, "demo-data", 0));
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x = Matrix::from_rows(rows)?;
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();

    let fit_predict = |level: usize,
                       x_train: &Matrix,
                       y_train: &[f64],
                       x_eval: &Matrix,
                       stream: u64|
     -> Result<Vec<f64>> {
        match fitter {
            DemoFitter::ForestDepth => {
                let cfg = ForestConfig {
                    n_trees: DEMO_TREES,
                    mtry: p,
                    min_leaf: 1,
                    max_depth: Some(level),
                    bootstrap: true,
                    seed: derive_seed(seed, "demo-forest", stream),
                };
                let forest = fit_forest(x_train, y_train, &cfg, Task::Regression, &names)?;
                predict_matrix(&forest, x_eval)
            }
            DemoFitter::HingeBasis => {
                let model = fit_greedy_hinges(x_train, y_train, level, DEMO_KNOTS);
                Ok(model.predict(x_eval))
            }
        }
    };

    let k = 10.min(n);
    let mut fold_rng = seeded_rng(derive_seed(seed, "demo-folds", 0));
    let assignment = make_folds(n, k, &mut fold_rng)?;

    let mut internal_pcc = Vec::with_capacity(complexity_levels.len());
    let mut external_pve = Vec::with_capacity(complexity_levels.len());
    for (li, &level) in complexity_levels.iter().enumerate() {
        let fitted = fit_predict(level, &x, &y, &x, 1000 + li as u64)?;
        internal_pcc.push(pcc(&y, &fitted)?);

        // The external estimate never lets a fold see its own rows.
        let mut held_out = vec![0.0; n];
        for fold in 0..k {
            let train_idx = assignment.train_indices(fold);
            let test_idx = assignment.test_indices(fold);
            let x_train = x.select_rows(&train_idx);
            let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let x_test = x.select_rows(&test_idx);
            let preds = fit_predict(
                level,
                &x_train,
                &y_train,
                &x_test,
                2000 + (li * k + fold) as u64,
            )?;
            for (local, &gi) in test_idx.iter().enumerate() {
                held_out[gi] = preds[local];
            }
        }
        external_pve.push(pve(&y, &held_out)?);
    }

    Ok(DemoResult {
        complexity_levels: complexity_levels.to_vec(),
        internal_pcc,
        external_pve,
        fitter,
    })
}
