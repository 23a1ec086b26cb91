//! Run configuration: declarative TOML file plus flag overrides, flags
//! winning. The resolved configuration is hashed into every output so
//! artifacts are traceable to the exact run that produced them.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use payshare::cv::{CvConfig, ForestStage, LassoStage, TuneMetric};
use payshare::ingest::StatKind;
use payshare::rng::fnv1a;
use payshare::Task;

use crate::CliError;

// ---------------------------------------------------------------------------
// Declarative file
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seasons: Option<Vec<String>>,
    pub kinds: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub min_games: Option<u32>,
    pub class_threshold: Option<f64>,
    pub include_age: Option<bool>,
    #[serde(default)]
    pub cv: FileCv,
    #[serde(default)]
    pub forest: FileForest,
    #[serde(default)]
    pub lasso: FileLasso,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileCv {
    pub k: Option<usize>,
    pub reps: Option<usize>,
    pub mtry_grid: Option<Vec<usize>>,
    pub important_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileForest {
    pub trees: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileLasso {
    pub inner_k: Option<usize>,
    pub n_lambda: Option<usize>,
    pub lambda_ratio: Option<f64>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

/// Everything a run depends on, after merging defaults, the config file
/// and command-line flags. Serialized (stably) for the config hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: String,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seasons: Vec<String>,
    pub kinds: Vec<String>,
    pub seed: u64,
    pub threads: usize,
    pub min_games: u32,
    pub class_threshold: f64,
    pub include_age: bool,
    pub k: usize,
    pub reps: usize,
    pub mtry_grid: Option<Vec<usize>>,
    pub important_threshold: f64,
    pub trees: usize,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub inner_k: usize,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub no_lasso: bool,
}

impl RunConfig {
    pub fn stat_kinds(&self) -> Result<Vec<StatKind>, CliError> {
        self.kinds
            .iter()
            .map(|k| StatKind::from_str(k).map_err(CliError::from))
            .collect()
    }

    /// Stable hex digest of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }

    /// Paths of the four inputs for one season and kind.
    pub fn season_paths(&self, season: &str, kind: StatKind) -> SeasonPaths {
        let dir = self.data_dir.join(season);
        SeasonPaths {
            stats: dir.join(format!("{}.csv", kind.label())),
            salaries: dir.join("salaries.csv"),
            payrolls: dir.join("payrolls.csv"),
            experience: dir.join("experience.csv"),
        }
    }

    /// Cross-validation engine configuration for a dataset with `p`
    /// features.
    pub fn cv_config(&self, task: Task, p: usize, use_lasso_selection: bool) -> CvConfig {
        CvConfig {
            k: self.k,
            repetitions: self.reps,
            mtry_grid: self
                .mtry_grid
                .clone()
                .unwrap_or_else(|| payshare::cv::default_mtry_grid(p)),
            use_lasso_selection,
            task,
            master_seed: self.seed,
            tune_metric: match task {
                Task::Regression => TuneMetric::Pve,
                Task::Classification => TuneMetric::Auc,
            },
            lasso: self.lasso_stage(),
            forest: ForestStage {
                n_trees: self.trees,
                min_leaf: self.min_leaf,
                max_depth: self.max_depth,
                bootstrap: self.bootstrap,
            },
            important_threshold: self.important_threshold,
            leakage_probe: false,
        }
    }

    pub fn lasso_stage(&self) -> LassoStage {
        LassoStage {
            inner_k: self.inner_k,
            n_lambda: self.n_lambda,
            lambda_ratio: self.lambda_ratio,
            solver: Default::default(),
        }
    }
}

pub struct SeasonPaths {
    pub stats: PathBuf,
    pub salaries: PathBuf,
    pub payrolls: PathBuf,
    pub experience: PathBuf,
}

/// Merge layers: defaults, then the file, then flags.
#[allow(clippy::too_many_arguments)]
pub fn resolve(
    mode: &str,
    file: FileConfig,
    data_dir: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seasons: Vec<String>,
    kinds: Vec<String>,
    k: Option<usize>,
    reps: Option<usize>,
    trees: Option<usize>,
    mtry_grid: Option<Vec<usize>>,
    no_lasso: bool,
    seed: Option<u64>,
    threads: Option<usize>,
    min_games: Option<u32>,
    class_threshold: Option<f64>,
    include_age: Option<bool>,
) -> RunConfig {
    RunConfig {
        mode: mode.to_string(),
        data_dir: data_dir
            .or(file.data_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
        out_dir: out_dir
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        seasons: if seasons.is_empty() {
            file.seasons.unwrap_or_default()
        } else {
            seasons
        },
        kinds: if kinds.is_empty() {
            file.kinds.unwrap_or_else(|| vec!["per-game".to_string()])
        } else {
            kinds
        },
        seed: seed.or(file.seed).unwrap_or(42),
        threads: threads.or(file.threads).unwrap_or(0),
        min_games: min_games
            .or(file.min_games)
            .unwrap_or(payshare::ingest::DEFAULT_MIN_GAMES),
        class_threshold: class_threshold
            .or(file.class_threshold)
            .unwrap_or(payshare::ingest::DEFAULT_CLASS_THRESHOLD),
        include_age: include_age.or(file.include_age).unwrap_or(true),
        k: k.or(file.cv.k).unwrap_or(10),
        reps: reps.or(file.cv.reps).unwrap_or(50),
        mtry_grid: mtry_grid.or(file.cv.mtry_grid),
        important_threshold: file.cv.important_threshold.unwrap_or(0.5),
        trees: trees.or(file.forest.trees).unwrap_or(500),
        min_leaf: file.forest.min_leaf,
        max_depth: file.forest.max_depth,
        bootstrap: file.forest.bootstrap.unwrap_or(true),
        inner_k: file.lasso.inner_k.unwrap_or(10),
        n_lambda: file.lasso.n_lambda.unwrap_or(100),
        lambda_ratio: file.lasso.lambda_ratio.unwrap_or(1e-3),
        no_lasso,
    }
}

pub fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("invalid {what} entry {t:?}")))
        })
        .collect()
}
