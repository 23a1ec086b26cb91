//! Command-line entry point for the salary-share analysis toolkit.
//!
//! Subcommands: clean, regress, classify, validate, demo-overfit,
//! density. Every run is deterministic given (inputs, config, seed) and
//! every artifact embeds the hash of the resolved configuration.
//! Exit codes: 0 success, 1 runtime/solver failure, 2 input/config
//! error.

mod config;
mod reports;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use payshare::cv::repeat_cv;
use payshare::experiments::{
    leakage_demo, season_ahead_validation, DemoFitter, DemoResult, DEFAULT_DEMO_LEVELS,
};
use payshare::forest::{fit_forest, forest_to_json, ForestConfig};
use payshare::ingest::{
    build_design_matrix, ingest_season, share_band_counts, write_records_csv, SeasonSources,
    StatKind,
};
use payshare::kde::{kde_auto_grid, Bandwidth};
use payshare::lasso::{lambda_grid, lasso_path, write_path_csv, LossKind};
use payshare::preprocess::{apply_scaler, fit_scaler, logit_vec};
use payshare::{Dataset, Task};

use config::{load_file_config, parse_usize_list, resolve, RunConfig};
use reports::RunEntry;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct CliError {
    message: String,
    exit: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            exit: 2,
        }
    }

    fn runtime(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            exit: 1,
        }
    }

    fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::config(format!("{}: {err}", path.display()))
    }
}

impl From<payshare::Error> for CliError {
    fn from(e: payshare::Error) -> CliError {
        CliError {
            exit: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "payshare",
    version,
    about = "Predict basketball player salary shares from performance statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Declarative TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding <season>/<kind>.csv, salaries.csv,
    /// payrolls.csv, experience.csv.
    #[arg(long, global = true, env = "PAYSHARE_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Season tag, repeatable (e.g. --season 2016-2017).
    #[arg(long = "season", global = true)]
    seasons: Vec<String>,
    /// Statistics kind, repeatable: per-game, per-36, per-100, advanced.
    #[arg(long = "kind", global = true)]
    kinds: Vec<String>,
    /// Outer cross-validation folds.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Cross-validation repetitions.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Trees per forest.
    #[arg(long, global = true)]
    trees: Option<usize>,
    /// Comma-separated mtry candidates (default derived from p).
    #[arg(long, global = true)]
    mtry_grid: Option<String>,
    /// Skip the LASSO selection stage (report the without-selection
    /// block only).
    #[arg(long, global = true)]
    no_lasso: bool,
    /// Master seed; echoed into every artifact.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out", global = true)]
    out_dir: Option<PathBuf>,
    /// Worker thread cap (0 = one per core). Results do not depend on
    /// this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Minimum games to keep a record.
    #[arg(long, global = true)]
    min_games: Option<u32>,
    /// Low/high pay class threshold on the share scale.
    #[arg(long, global = true)]
    class_threshold: Option<f64>,
    /// Keep Age among the predictors.
    #[arg(long, global = true)]
    include_age: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, merge and clean one or more seasons; write cleaned CSVs
    /// and cleaning logs.
    Clean,
    /// Repeated nested CV for share regression; tables for PCC, PVE and
    /// selected features.
    Regress {
        /// Dump the full-data (lambda, coefficients, objective) path
        /// for the first season/kind as CSV.
        #[arg(long)]
        lasso_path: Option<PathBuf>,
    },
    /// Repeated nested CV for the low/high pay class; AUC tables plus
    /// the share-band distribution.
    Classify,
    /// Fit on the first season, predict the second (never touched
    /// before prediction).
    Validate {
        /// regress or classify.
        #[arg(long, default_value = "regress")]
        task: String,
        /// Save the fitted season-t forest as versioned JSON.
        #[arg(long)]
        save_forest: Option<PathBuf>,
    },
    /// Internal-vs-external evaluation curves on pure noise.
    DemoOverfit {
        /// Comma-separated complexity levels (tree depths or basis-term
        /// counts, by fitter).
        #[arg(long)]
        levels: Option<String>,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        /// Flexible fitter to crank: forest-depth or hinge-basis.
        #[arg(long, default_value = "forest-depth")]
        fitter: String,
    },
    /// Kernel density estimate of the share distribution per season.
    Density {
        #[arg(long, default_value_t = 512)]
        grid_points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mode = match &cli.command {
        Command::Clean => "clean",
        Command::Regress { .. } => "regress",
        Command::Classify => "classify",
        Command::Validate { .. } => "validate",
        Command::DemoOverfit { .. } => "demo-overfit",
        Command::Density { .. } => "density",
    };

    let file = match &cli.common.config {
        Some(path) => load_file_config(path)?,
        None => Default::default(),
    };
    let mtry_grid = cli
        .common
        .mtry_grid
        .as_deref()
        .map(|raw| parse_usize_list(raw, "mtry grid"))
        .transpose()?;
    let run_config = resolve(
        mode,
        file,
        cli.common.data_dir,
        cli.common.out_dir,
        cli.common.seasons,
        cli.common.kinds,
        cli.common.k,
        cli.common.reps,
        cli.common.trees,
        mtry_grid,
        cli.common.no_lasso,
        cli.common.seed,
        cli.common.threads,
        cli.common.min_games,
        cli.common.class_threshold,
        cli.common.include_age,
    );

    if run_config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(run_config.threads)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Clean => cmd_clean(&run_config),
        Command::Regress { lasso_path } => cmd_cv(&run_config, Task::Regression, lasso_path),
        Command::Classify => cmd_cv(&run_config, Task::Classification, None),
        Command::Validate { task, save_forest } => cmd_validate(&run_config, &task, save_forest),
        Command::DemoOverfit {
            levels,
            n,
            p,
            fitter,
        } => cmd_demo(&run_config, levels, n, p, &fitter),
        Command::Density { grid_points } => cmd_density(&run_config, grid_points),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn require_seasons(config: &RunConfig, at_least: usize) -> Result<(), CliError> {
    if config.seasons.len() < at_least {
        return Err(CliError::config(format!(
            "this command needs at least {at_least} --season value(s)"
        )));
    }
    Ok(())
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn load_records(
    config: &RunConfig,
    season: &str,
    kind: StatKind,
) -> Result<
    (
        Vec<payshare::ingest::PlayerSeasonRecord>,
        payshare::ingest::CleanLog,
    ),
    CliError,
> {
    let paths = config.season_paths(season, kind);
    let sources = SeasonSources {
        stats: open(&paths.stats)?,
        salaries: open(&paths.salaries)?,
        payrolls: open(&paths.payrolls)?,
        experience: open(&paths.experience)?,
    };
    Ok(ingest_season(
        sources,
        kind,
        season,
        config.min_games,
        config.class_threshold,
    )?)
}

fn load_dataset(
    config: &RunConfig,
    season: &str,
    kind: StatKind,
    task: Task,
) -> Result<Dataset, CliError> {
    let (records, _) = load_records(config, season, kind)?;
    Ok(build_design_matrix(
        &records,
        kind,
        task,
        config.include_age,
    )?)
}

// ---------------------------------------------------------------------------
// clean
// ---------------------------------------------------------------------------

fn cmd_clean(config: &RunConfig) -> Result<(), CliError> {
    require_seasons(config, 1)?;
    let hash = config.hash();
    for season in &config.seasons {
        for kind in config.stat_kinds()? {
            let (records, log) = load_records(config, season, kind)?;
            let dir = config.out_dir.join(season);

            let mut csv = format!("# config_hash: {hash}\n");
            let mut buf = Vec::new();
            write_records_csv(&records, &mut buf)?;
            csv.push_str(&String::from_utf8(buf).expect("csv output is UTF-8"));
            write_output(&dir.join(format!("{}-clean.csv", kind.label())), &csv)?;

            let log_text = format!("{}config hash: {hash}\n", log.render());
            write_output(
                &dir.join(format!("{}-clean-log.txt", kind.label())),
                &log_text,
            )?;
            println!(
                "{season}/{kind}: {} records cleaned ({} merged)",
                log.cleaned, log.merged
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// regress / classify
// ---------------------------------------------------------------------------

fn cmd_cv(config: &RunConfig, task: Task, path_dump: Option<PathBuf>) -> Result<(), CliError> {
    require_seasons(config, 1)?;
    let hash = config.hash();
    let selection_modes: Vec<bool> = if config.no_lasso {
        vec![false]
    } else {
        vec![true, false]
    };

    let mut entries = Vec::new();
    let mut bands: Vec<(String, [usize; 6])> = Vec::new();
    for season in &config.seasons {
        for kind in config.stat_kinds()? {
            let dataset = load_dataset(config, season, kind, task)?;
            if task == Task::Classification && !bands.iter().any(|(s, _)| s == season) {
                let (records, _) = load_records(config, season, kind)?;
                let shares: Vec<f64> = records.iter().filter_map(|r| r.salary_share).collect();
                bands.push((season.clone(), share_band_counts(&shares)));
            }
            for &with_selection in &selection_modes {
                let cv = config.cv_config(task, dataset.p(), with_selection);
                let report = repeat_cv(&dataset, &cv)?;
                println!(
                    "{season}/{kind} ({}): best mtry {}",
                    if with_selection {
                        "with selection"
                    } else {
                        "without selection"
                    },
                    report.best_mtry
                );
                entries.push(RunEntry {
                    season: season.clone(),
                    kind: kind.label().to_string(),
                    with_selection,
                    report,
                });
            }
        }
    }

    if let Some(path) = path_dump {
        dump_lasso_path(config, &path, &hash)?;
    }

    let name = match task {
        Task::Regression => "regress",
        Task::Classification => "classify",
    };
    let extra = if bands.is_empty() {
        String::new()
    } else {
        reports::band_table(&bands)
    };
    let markdown = reports::assemble_markdown(
        &format!("Salary share {name} report"),
        &entries,
        &config.seasons,
        &config.kinds,
        task,
        &extra,
        &hash,
    );
    write_output(&config.out_dir.join(format!("{name}-tables.md")), &markdown)?;

    let json = serde_json::json!({
        "config_hash": hash,
        "config": config,
        "share_bands": bands.iter().map(|(s, b)| serde_json::json!({
            "season": s,
            "counts": b,
        })).collect::<Vec<_>>(),
        "runs": entries.iter().map(|e| serde_json::json!({
            "season": e.season,
            "kind": e.kind,
            "with_selection": e.with_selection,
            "report": e.report,
        })).collect::<Vec<_>>(),
    });
    write_output(
        &config.out_dir.join(format!("{name}-report.json")),
        &serde_json::to_string_pretty(&json).expect("report serializes"),
    )?;
    Ok(())
}

/// Diagnostic dump of the full-data regularization path for the first
/// season and kind.
fn dump_lasso_path(config: &RunConfig, path: &Path, hash: &str) -> Result<(), CliError> {
    let season = &config.seasons[0];
    let kind = config.stat_kinds()?[0];
    let dataset = load_dataset(config, season, kind, Task::Regression)?;
    let scaler = fit_scaler(&dataset.x)?;
    let x = apply_scaler(&dataset.x, &scaler)?;
    let y = logit_vec(&dataset.y)?;
    let stage = config.lasso_stage();
    let grid = lambda_grid(
        &x,
        &y,
        stage.n_lambda,
        stage.lambda_ratio,
        LossKind::Squared,
    )?;
    let fits = lasso_path(&x, &y, &grid, LossKind::Squared, &stage.solver)?;
    let mut buf = Vec::new();
    write_path_csv(&fits, &dataset.feature_names, &mut buf)
        .map_err(|e| CliError::runtime(format!("path dump: {e}")))?;
    let contents = format!(
        "# config_hash: {hash}\n{}",
        String::from_utf8(buf).expect("csv output is UTF-8")
    );
    write_output(path, &contents)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(
    config: &RunConfig,
    task_name: &str,
    save_forest: Option<PathBuf>,
) -> Result<(), CliError> {
    require_seasons(config, 2)?;
    let task = match task_name {
        "regress" | "regression" => Task::Regression,
        "classify" | "classification" => Task::Classification,
        other => return Err(CliError::config(format!("unknown validate task {other:?}"))),
    };
    let hash = config.hash();
    let kind = config.stat_kinds()?[0];
    let train_season = &config.seasons[0];
    let test_season = &config.seasons[1];
    let train = load_dataset(config, train_season, kind, task)?;
    let test = load_dataset(config, test_season, kind, task)?;

    // Feature choice comes from season t only.
    let selected = if config.no_lasso {
        train.feature_names.clone()
    } else {
        select_on_full_season(config, &train)?
    };

    let template = ForestConfig {
        n_trees: config.trees,
        mtry: selected.len().div_ceil(3).max(1),
        min_leaf: config.min_leaf.unwrap_or(match task {
            Task::Regression => 5,
            Task::Classification => 1,
        }),
        max_depth: config.max_depth,
        bootstrap: config.bootstrap,
        seed: 0, // replaced by the derived stream inside
    };
    let report = season_ahead_validation(&train, &test, &selected, &template, config.seed)?;

    if let Some(path) = save_forest {
        // Refit identically (same derived seed) on the selected columns
        // of season t and persist it.
        let cols: Vec<usize> = selected
            .iter()
            .map(|n| train.feature_names.iter().position(|f| f == n).unwrap())
            .collect();
        let x_raw = train.x.select_columns(&cols);
        let scaler = fit_scaler(&x_raw)?;
        let x = apply_scaler(&x_raw, &scaler)?;
        let cfg = ForestConfig {
            mtry: template.mtry.min(cols.len()).max(1),
            seed: payshare::rng::derive_seed(config.seed, "season-ahead", 0),
            ..template.clone()
        };
        let forest = fit_forest(&x, &train.y, &cfg, task, &selected)?;
        write_output(&path, &forest_to_json(&forest))?;
    }

    let mut md = format!(
        "# Season-ahead validation\n\ntrain {train_season} -> predict {test_season} ({} records -> {}), kind {kind}\n\nselected features: {}\n\n",
        report.n_train,
        report.n_test,
        report.selected_features.join(", ")
    );
    if let (Some(pve), Some(pcc)) = (report.pve, report.pcc) {
        md.push_str(&format!("PVE: {pve:.3}\nPCC: {pcc:.3}\n"));
        println!("PVE {pve:.3}, PCC {pcc:.3}");
    }
    if let Some(auc) = report.auc {
        md.push_str(&format!("AUC: {auc:.3}\n"));
        println!("AUC {auc:.3}");
    }
    md.push_str(&format!("\nconfig hash: {hash}\n"));
    write_output(&config.out_dir.join("validate.md"), &md)?;

    let json = serde_json::json!({
        "config_hash": hash,
        "config": config,
        "report": report,
    });
    write_output(
        &config.out_dir.join("validate.json"),
        &serde_json::to_string_pretty(&json).expect("report serializes"),
    )?;
    Ok(())
}

/// Tune and fit the LASSO on the whole training season; the selected
/// statistics feed the season-ahead forest.
fn select_on_full_season(config: &RunConfig, train: &Dataset) -> Result<Vec<String>, CliError> {
    use payshare::lasso::{
        lasso_fit, logistic_lasso_fit, selected_features, tune_lambda_cv, SELECTION_TOLERANCE,
    };

    let scaler = fit_scaler(&train.x)?;
    let x = apply_scaler(&train.x, &scaler)?;
    let stage = config.lasso_stage();
    let (y, loss) = match train.task {
        Task::Regression => (logit_vec(&train.y)?, LossKind::Squared),
        Task::Classification => (train.y.clone(), LossKind::Logistic),
    };
    let grid = lambda_grid(&x, &y, stage.n_lambda, stage.lambda_ratio, loss)?;
    let tuning = tune_lambda_cv(
        &x,
        &y,
        stage.inner_k.min(x.n_rows()),
        &grid,
        payshare::rng::derive_seed(config.seed, "validate-inner", 0),
        loss,
        &stage.solver,
    )?;
    let fit = match loss {
        LossKind::Squared => lasso_fit(&x, &y, tuning.best_lambda, None, &stage.solver)?,
        LossKind::Logistic => logistic_lasso_fit(&x, &y, tuning.best_lambda, None, &stage.solver)?,
    };
    let names = selected_features(&fit, &train.feature_names, SELECTION_TOLERANCE);
    Ok(if names.is_empty() {
        train.feature_names.clone()
    } else {
        names
    })
}

// ---------------------------------------------------------------------------
// demo-overfit
// ---------------------------------------------------------------------------

fn cmd_demo(
    config: &RunConfig,
    levels: Option<String>,
    n: usize,
    p: usize,
    fitter_name: &str,
) -> Result<(), CliError> {
    let hash = config.hash();
    let levels = match levels {
        Some(raw) => parse_usize_list(&raw, "complexity level")?,
        None => DEFAULT_DEMO_LEVELS.to_vec(),
    };
    let fitter = match fitter_name {
        "forest-depth" | "forest" => DemoFitter::ForestDepth,
        "hinge-basis" | "hinge" => DemoFitter::HingeBasis,
        other => return Err(CliError::config(format!("unknown demo fitter {other:?}"))),
    };
    let result: DemoResult = leakage_demo(n, p, &levels, config.seed, fitter)?;

    let csv = format!("# config_hash: {hash}\n{}", result.to_csv());
    write_output(&config.out_dir.join("demo-overfit.csv"), &csv)?;

    let md = format!(
        "# Overfitting demonstration on pure noise\n\nn = {n}, p = {p}, seed = {}\n\n{}\nconfig hash: {hash}\n",
        config.seed,
        result.to_markdown()
    );
    write_output(&config.out_dir.join("demo-overfit.md"), &md)?;
    for i in 0..result.complexity_levels.len() {
        println!(
            "level {:>3}: internal PCC {:.3}, external PVE {:+.3}",
            result.complexity_levels[i], result.internal_pcc[i], result.external_pve[i]
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

fn cmd_density(config: &RunConfig, grid_points: usize) -> Result<(), CliError> {
    require_seasons(config, 1)?;
    let hash = config.hash();
    let kind = config.stat_kinds()?[0];
    for season in &config.seasons {
        let (records, _) = load_records(config, season, kind)?;
        let shares: Vec<f64> = records.iter().filter_map(|r| r.salary_share).collect();
        let curve = kde_auto_grid(&shares, Bandwidth::Auto, grid_points)?;
        let mut csv = format!(
            "# config_hash: {hash}\n# season: {season}, n: {}, bandwidth: {}\nshare,density\n",
            curve.n, curve.bandwidth
        );
        for (g, d) in curve.grid.iter().zip(&curve.density) {
            csv.push_str(&format!("{g},{d}\n"));
        }
        write_output(&config.out_dir.join(format!("density-{season}.csv")), &csv)?;
        println!(
            "{season}: {} shares, bandwidth {:.4}, curve integral {:.4}",
            curve.n,
            curve.bandwidth,
            curve.integral()
        );
    }
    Ok(())
}
