//! CART-based random forest for share regression and share-class
//! classification.
//!
//! Each tree is grown on a bootstrap sample with a fresh random stream
//! derived from `(seed, tree index)`, drawing `mtry` candidate features
//! without replacement at every split. Split thresholds sit at
//! midpoints of consecutive sorted unique values; ties in impurity
//! decrease break toward the lowest feature index, then the lowest
//! threshold, so a fitted forest is a pure function of (data, config).
//! Bootstrap indices are drawn over a canonical row order (stable hash
//! of the row bytes), so datasets differing only by row permutation
//! grow identical forests under the same seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, seeded_rng, Digest};

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split, in [1, p].
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestConfig {
    /// Regression defaults: 500 trees, min_leaf 5, bootstrap on.
    pub fn regression(mtry: usize, seed: u64) -> Self {
        ForestConfig {
            n_trees: 500,
            mtry,
            min_leaf: 5,
            max_depth: None,
            bootstrap: true,
            seed,
        }
    }

    /// Classification defaults: 500 trees, min_leaf 1, bootstrap on.
    pub fn classification(mtry: usize, seed: u64) -> Self {
        ForestConfig {
            min_leaf: 1,
            ..ForestConfig::regression(mtry, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    /// `value` is the mean response (regression) or the class-1
    /// fraction (classification) of the samples that reached the leaf.
    Leaf { value: f64, n_samples: usize },
}

impl TreeNode {
    fn evaluate(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.evaluate(row)
                } else {
                    right.evaluate(row)
                }
            }
        }
    }

    fn digest_into(&self, d: &mut Digest) {
        match self {
            TreeNode::Leaf { value, n_samples } => {
                d.update_u64(0);
                d.update_f64(*value);
                d.update_u64(*n_samples as u64);
            }
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                d.update_u64(1);
                d.update_u64(*feature as u64);
                d.update_f64(*threshold);
                left.digest_into(d);
                right.digest_into(d);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
    pub task: Task,
    pub feature_names: Vec<String>,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Stable structural hash; equal forests hash equal across runs.
    pub fn structure_digest(&self) -> u64 {
        let mut d = Digest::new();
        d.update_u64(self.trees.len() as u64);
        for tree in &self.trees {
            tree.digest_into(&mut d);
        }
        d.finish()
    }
}

// ---------------------------------------------------------------------------
// Growth
// ---------------------------------------------------------------------------

struct GrowContext<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    config: &'a ForestConfig,
    task: Task,
}

/// Best threshold for one feature over the node rows, or None when no
/// admissible split improves impurity. Regression scores by SSE
/// reduction (constant terms cancel); classification by Gini decrease,
/// which for 0/1 labels is twice the SSE reduction and picks the same
/// split.
fn best_split_for_feature(
    ctx: &GrowContext,
    indices: &[usize],
    feature: usize,
    scratch: &mut Vec<(f64, f64)>,
) -> Option<(f64, f64)> {
    scratch.clear();
    scratch.extend(indices.iter().map(|&i| (ctx.x.get(i, feature), ctx.y[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    let total: f64 = scratch.iter().map(|p| p.1).sum();
    let min_leaf = ctx.config.min_leaf;

    let mut best: Option<(f64, f64)> = None; // (decrease, threshold)
    let mut left_sum = 0.0;
    for k in 1..n {
        left_sum += scratch[k - 1].1;
        if scratch[k].0 == scratch[k - 1].0 {
            continue; // not a boundary between distinct values
        }
        if k < min_leaf || n - k < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let (nl, nr, nt) = (k as f64, (n - k) as f64, n as f64);
        let decrease = match ctx.task {
            Task::Regression => {
                left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / nt
            }
            Task::Classification => {
                // gini(node)*n = 2*c1*(n-c1)/n with c1 = sum of labels
                2.0 * (total * (nt - total) / nt
                    - left_sum * (nl - left_sum) / nl
                    - right_sum * (nr - right_sum) / nr)
            }
        };
        let threshold = (scratch[k - 1].0 + scratch[k].0) / 2.0;
        let better = match best {
            None => decrease > 0.0,
            Some((bd, bt)) => decrease > bd || (decrease == bd && threshold < bt),
        };
        if better && decrease > 0.0 {
            best = Some((decrease, threshold));
        }
    }
    best
}

fn grow_node(
    ctx: &GrowContext,
    indices: &[usize],
    depth: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    scratch: &mut Vec<(f64, f64)>,
) -> TreeNode {
    let n = indices.len();
    let sum: f64 = indices.iter().map(|&i| ctx.y[i]).sum();
    let mean = sum / n as f64;
    let leaf = |mean: f64| TreeNode::Leaf {
        value: mean,
        n_samples: n,
    };

    let pure = indices.iter().all(|&i| ctx.y[i] == ctx.y[indices[0]]);
    let depth_stop = ctx.config.max_depth.is_some_and(|d| depth >= d);
    if pure || n < 2 * ctx.config.min_leaf || depth_stop {
        return leaf(mean);
    }

    let p = ctx.x.n_cols();
    let mtry = ctx.config.mtry.min(p);
    let mut candidates: Vec<usize> = rand::seq::index::sample(rng, p, mtry).into_vec();
    // Evaluate in ascending feature order so equal impurity decreases
    // resolve to the lowest feature index.
    candidates.sort_unstable();

    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
    for &feature in &candidates {
        if let Some((decrease, threshold)) = best_split_for_feature(ctx, indices, feature, scratch)
        {
            let better = match best {
                None => true,
                Some((bd, _, _)) => decrease > bd,
            };
            if better {
                best = Some((decrease, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return leaf(mean);
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| ctx.x.get(i, feature) <= threshold);
    let left = grow_node(ctx, &left_idx, depth + 1, rng, scratch);
    let right = grow_node(ctx, &right_idx, depth + 1, rng, scratch);
    TreeNode::Internal {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Grow a single CART tree on all rows of `x` using the supplied stream.
pub fn grow_tree(
    x: &Matrix,
    y: &[f64],
    config: &ForestConfig,
    task: Task,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<TreeNode> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidInput(
            "cannot grow a tree on zero rows".into(),
        ));
    }
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} responses",
            x.n_rows(),
            y.len()
        )));
    }
    let ctx = GrowContext { x, y, config, task };
    let indices: Vec<usize> = (0..x.n_rows()).collect();
    let mut scratch = Vec::with_capacity(x.n_rows());
    Ok(grow_node(&ctx, &indices, 0, rng, &mut scratch))
}

/// Canonical row order: ascending stable hash of the row bytes plus the
/// response, with the original index as the final tie key. Identical
/// row multisets produce identical orders.
fn canonical_order(x: &Matrix, y: &[f64]) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..x.n_rows())
        .map(|i| {
            let mut d = Digest::new();
            for &v in x.row(i) {
                d.update_f64(v);
            }
            d.update_f64(y[i]);
            (d.finish(), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn validate_forest_inputs(
    x: &Matrix,
    y: &[f64],
    config: &ForestConfig,
    task: Task,
    feature_names: &[String],
) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidInput(
            "cannot fit a forest on zero rows".into(),
        ));
    }
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} responses",
            x.n_rows(),
            y.len()
        )));
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names vs {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    if config.mtry == 0 || config.mtry > x.n_cols() {
        return Err(Error::Config(format!(
            "mtry must be in [1, {}], got {}",
            x.n_cols(),
            config.mtry
        )));
    }
    if config.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be at least 1".into()));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in input".into()));
    }
    if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(
            "classification response must be 0/1".into(),
        ));
    }
    Ok(())
}

/// Fit a forest: one bootstrap sample and one derived random stream per
/// tree. Tree growth parallelizes across trees; the result is identical
/// for any thread count.
pub fn fit_forest(
    x: &Matrix,
    y: &[f64],
    config: &ForestConfig,
    task: Task,
    feature_names: &[String],
) -> Result<Forest> {
    validate_forest_inputs(x, y, config, task, feature_names)?;
    let n = x.n_rows();
    let canon = canonical_order(x, y);

    let trees: Vec<TreeNode> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(derive_seed(config.seed, "tree", t as u64));
            let indices: Vec<usize> = if config.bootstrap {
                (0..n)
                    .map(|_| canon[rand::Rng::gen_range(&mut rng, 0..n)])
                    .collect()
            } else {
                canon.clone()
            };
            let ctx = GrowContext { x, y, config, task };
            let mut scratch = Vec::with_capacity(n);
            grow_node(&ctx, &indices, 0, &mut rng, &mut scratch)
        })
        .collect();

    Ok(Forest {
        trees,
        config: config.clone(),
        task,
        feature_names: feature_names.to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

fn check_row(forest: &Forest, row: &[f64]) -> Result<()> {
    if row.len() != forest.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "query row has {} features, forest expects {}",
            row.len(),
            forest.n_features()
        )));
    }
    Ok(())
}

/// Mean of the tree values for a regression forest. Predictions are
/// weighted averages of observed training responses and therefore stay
/// inside [min(y_train), max(y_train)].
pub fn predict(forest: &Forest, row: &[f64]) -> Result<f64> {
    if forest.task != Task::Regression {
        return Err(Error::InvalidInput(
            "predict requires a regression forest; use predict_proba".into(),
        ));
    }
    check_row(forest, row)?;
    let sum: f64 = forest.trees.iter().map(|t| t.evaluate(row)).sum();
    Ok(sum / forest.trees.len() as f64)
}

/// Mean leaf class-1 fraction for a classification forest; doubles as
/// the ranking score for AUC.
pub fn predict_proba(forest: &Forest, row: &[f64]) -> Result<f64> {
    if forest.task != Task::Classification {
        return Err(Error::InvalidInput(
            "predict_proba requires a classification forest".into(),
        ));
    }
    check_row(forest, row)?;
    let sum: f64 = forest.trees.iter().map(|t| t.evaluate(row)).sum();
    Ok(sum / forest.trees.len() as f64)
}

/// Predict every row of a matrix with whichever head matches the task.
pub fn predict_matrix(forest: &Forest, x: &Matrix) -> Result<Vec<f64>> {
    (0..x.n_rows())
        .map(|i| match forest.task {
            Task::Regression => predict(forest, x.row(i)),
            Task::Classification => predict_proba(forest, x.row(i)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VersionedForest {
    format_version: u32,
    forest: Forest,
}

pub fn forest_to_json(forest: &Forest) -> String {
    serde_json::to_string(&VersionedForest {
        format_version: FOREST_FORMAT_VERSION,
        forest: forest.clone(),
    })
    .expect("forest serialization cannot fail")
}

pub fn forest_from_json(json: &str) -> Result<Forest> {
    let versioned: VersionedForest = serde_json::from_str(json)
        .map_err(|e| Error::Parse(format!("invalid forest JSON: {e}")))?;
    if versioned.format_version != FOREST_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "forest format version {} unsupported (expected {})",
            versioned.format_version, FOREST_FORMAT_VERSION
        )));
    }
    Ok(versioned.forest)
}
