//! Acceptance suite: one test per release criterion, each printing a
//! pass line with the measured quantities.
//!
//! Run with `cargo test -p payshare --test acceptance -- --nocapture`
//! to see the per-criterion measurements.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use payshare::cv::{repeat_cv, run_cv, CvConfig, CvReport, LassoStage};
use payshare::experiments::{
    internal_evaluation, lasso_external_pve, leakage_demo, synthetic_generate, DemoFitter,
    SyntheticForm, SyntheticSpec, DEFAULT_DEMO_LEVELS,
};
use payshare::forest::{fit_forest, predict, ForestConfig};
use payshare::ingest::{ingest_season, SeasonSources, StatKind};
use payshare::lasso::{lambda_max, lasso_fit, LassoSettings, LossKind};
use payshare::metrics::{auc, mae, mse, pcc, pve};
use payshare::preprocess::inv_logit;
use payshare::rng::seeded_rng;
use payshare::{Dataset, Matrix, ResponseScale, Task};

// ---------------------------------------------------------------------------
// Shared helpers and oracles
// ---------------------------------------------------------------------------

fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_rows(
        (0..n)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect(),
    )
    .unwrap()
}

/// Exhaustive O(n^2) pair-counting AUC oracle, ties count one half.
fn auc_pair_oracle(labels: &[bool], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Penalized objective with the intercept profiled out exactly:
/// f(b) = sum((y - ybar) - (X - Xbar) b)^2 + lambda * |b|_1.
fn profiled_objective(xc: &[Vec<f64>], yc: &[f64], lambda: f64, beta: &[f64]) -> f64 {
    let mut rss = 0.0;
    for i in 0..yc.len() {
        let mut r = yc[i];
        for (j, b) in beta.iter().enumerate() {
            r -= xc[j][i] * b;
        }
        rss += r * r;
    }
    rss + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Dense grid search over beta in [-5,5]^p at final resolution <= 1e-3,
/// via three coarse-to-fine stages (the objective is convex, so
/// refining around the coarse winner with a generous window is exact).
fn grid_search_objective(x: &Matrix, y: &[f64], lambda: f64) -> f64 {
    let n = x.n_rows();
    let p = x.n_cols();
    assert!(p <= 2);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let xc: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            col.iter().map(|v| v - m).collect()
        })
        .collect();

    let evaluate = |beta: &[f64]| profiled_objective(&xc, &yc, lambda, beta);

    let mut center = vec![0.0; p];
    let mut half_width: f64 = 5.0;
    let mut step: f64 = 0.1;
    let mut best_obj = f64::INFINITY;
    for _stage in 0..3 {
        let steps_per_dim = (2.0 * half_width / step).round() as i64 + 1;
        let mut best_beta = center.clone();
        let mut stage_best = f64::INFINITY;
        if p == 1 {
            for a in 0..steps_per_dim {
                let b0 = (center[0] - half_width + a as f64 * step).clamp(-5.0, 5.0);
                let obj = evaluate(&[b0]);
                if obj < stage_best {
                    stage_best = obj;
                    best_beta = vec![b0];
                }
            }
        } else {
            for a in 0..steps_per_dim {
                let b0 = (center[0] - half_width + a as f64 * step).clamp(-5.0, 5.0);
                for b in 0..steps_per_dim {
                    let b1 = (center[1] - half_width + b as f64 * step).clamp(-5.0, 5.0);
                    let obj = evaluate(&[b0, b1]);
                    if obj < stage_best {
                        stage_best = obj;
                        best_beta = vec![b0, b1];
                    }
                }
            }
        }
        center = best_beta;
        best_obj = stage_best;
        half_width = step * 2.5;
        step /= 25.0;
    }
    best_obj
}

/// Share-scale synthetic season driven by two features.
fn share_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let latent = 1.4 * row[0] + 1.0 * row[1] + rng.sample::<f64, _>(StandardNormal) * 0.4;
        y.push(inv_logit(latent - 2.6).clamp(1e-6, 1.0 - 1e-6));
        rows.push(row);
    }
    Dataset {
        season: "synthetic".into(),
        kind: "per-game".into(),
        feature_names: (0..p).map(|j| format!("f{j}")).collect(),
        x: Matrix::from_rows(rows).unwrap(),
        y,
        task: Task::Regression,
        scale: ResponseScale::Share,
    }
}

// ---------------------------------------------------------------------------
// Shared expensive runs
// ---------------------------------------------------------------------------

/// Full-scale protocol run shared by the selection-stability and the
/// performance-envelope criteria: n=450, p=30, planted two-feature
/// signal, R=50, k=10, 500 trees, five-point mtry grid, full nesting.
fn full_scale_run() -> &'static (CvReport, Duration) {
    static RUN: OnceLock<(CvReport, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = SyntheticSpec {
            n: 450,
            p: 30,
            support: vec![0, 1],
            form: SyntheticForm::Linear,
            noise_sd: 1.0,
            seed: 77,
        };
        let mut dataset = synthetic_generate(&spec).unwrap().dataset;
        dataset.feature_names[0] = "EXP".into();
        dataset.feature_names[1] = "MP".into();

        let config = CvConfig::new(Task::Regression, 30, 4242);
        assert_eq!(config.k, 10);
        assert_eq!(config.repetitions, 50);
        assert_eq!(config.forest.n_trees, 500);
        assert_eq!(config.mtry_grid.len(), 5);

        let started = Instant::now();
        let report = repeat_cv(&dataset, &config).unwrap();
        (report, started.elapsed())
    })
}

struct GapSeed {
    internal_pve: f64,
    cv_pve: f64,
    lasso_pve: f64,
}

/// Ten-seed nonlinear family shared by the overfitting-gap and the
/// forest-over-lasso criteria. Noise 1.0 puts the external PVE near
/// 0.6. The stored duration covers the computation only, not time spent
/// queued behind the full-scale run.
fn gap_family() -> &'static (Vec<GapSeed>, Duration) {
    static RUNS: OnceLock<(Vec<GapSeed>, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        // Serialize behind the full-scale run so its timing criterion
        // is not polluted by a concurrent heavy test.
        let _ = full_scale_run();
        let started = Instant::now();
        let seeds = (0..10u64)
            .map(|seed| {
                let spec = SyntheticSpec {
                    n: 450,
                    p: 30,
                    support: vec![0, 1, 2, 3, 4],
                    form: SyntheticForm::Nonlinear,
                    noise_sd: 1.0,
                    seed: 100 + seed,
                };
                let dataset = synthetic_generate(&spec).unwrap().dataset;
                let stage = LassoStage {
                    inner_k: 5,
                    n_lambda: 50,
                    lambda_ratio: 1e-3,
                    solver: LassoSettings::default(),
                };

                let mut config = CvConfig::new(Task::Regression, 30, 500 + seed);
                config.repetitions = 3;
                config.k = 10;
                config.mtry_grid = vec![10];
                config.forest.n_trees = 150;
                config.lasso = stage.clone();
                let report = repeat_cv(&dataset, &config).unwrap();
                let cv_pve = report.best_summary().pve.as_ref().unwrap().mean;

                let template = ForestConfig {
                    n_trees: 150,
                    mtry: 10,
                    min_leaf: 5,
                    max_depth: None,
                    bootstrap: true,
                    seed: 0,
                };
                let internal =
                    internal_evaluation(&dataset, &stage, &template, 900 + seed).unwrap();
                let lasso_pve = lasso_external_pve(&dataset, &stage, 10, 700 + seed).unwrap();
                GapSeed {
                    internal_pve: internal.forest_pve,
                    cv_pve,
                    lasso_pve,
                }
            })
            .collect();
        (seeds, started.elapsed())
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn c01_lasso_grid_search_equivalence_and_kkt_certificates() {
    let started = Instant::now();
    let settings = LassoSettings::default();
    let mut rng = seeded_rng(1001);

    // 50 tiny instances against the dense grid oracle. The grid value
    // can only sit at or above the true minimum, so the solver must
    // come in no worse (within tolerance).
    for instance in 0..50 {
        let n = rng.gen_range(5..=20);
        let p = rng.gen_range(1..=2usize);
        let x = random_matrix(n, p, 2000 + instance);
        let mut noise = seeded_rng(3000 + instance);
        let y: Vec<f64> = (0..n)
            .map(|i| 0.8 * x.get(i, 0) + noise.sample::<f64, _>(StandardNormal) * 1.2)
            .collect();
        let lam_max = lambda_max(&x, &y, LossKind::Squared).unwrap();
        let lambda = lam_max * rng.gen_range(0.05..0.8);
        let fit = lasso_fit(&x, &y, lambda, None, &settings).unwrap();
        let grid_obj = grid_search_objective(&x, &y, lambda);
        assert!(
            fit.objective_value <= grid_obj + 1e-6,
            "instance {instance}: solver {} vs grid {}",
            fit.objective_value,
            grid_obj
        );
        assert!((fit.objective_value - grid_obj).abs() < 1e-3);
    }

    // KKT certificates across dimensionalities up to 50.
    let mut worst_kkt: f64 = 0.0;
    for (i, &p) in [5usize, 12, 20, 35, 50].iter().enumerate() {
        for round in 0..4u64 {
            let n = 40 + 30 * i;
            let x = random_matrix(n, p, 4000 + 10 * i as u64 + round);
            let mut noise = seeded_rng(5000 + round);
            let y: Vec<f64> = (0..n)
                .map(|r| {
                    x.get(r, 0) - 0.6 * x.get(r, p / 2) + noise.sample::<f64, _>(StandardNormal)
                })
                .collect();
            let lam_max = lambda_max(&x, &y, LossKind::Squared).unwrap();
            for frac in [0.5, 0.1, 0.01] {
                let fit = lasso_fit(&x, &y, lam_max * frac, None, &settings).unwrap();
                worst_kkt = worst_kkt.max(fit.kkt_residual);
                assert!(fit.kkt_residual < 1e-6, "p={p}, frac={frac}");
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "criterion 01 pass: 50 grid-oracle instances matched, worst KKT {worst_kkt:.2e}, {elapsed:?}"
    );
}

#[test]
fn c02_orthonormal_designs_match_the_soft_threshold_closed_form() {
    let settings = LassoSettings::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let n = 40;
        let p = 6;
        // Center then Gram-Schmidt: X'X = I with mean-zero columns.
        let raw = random_matrix(n, p, 6000 + seed);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
        for j in 0..p {
            let mut c = raw.column(j);
            let mean = c.iter().sum::<f64>() / n as f64;
            for v in c.iter_mut() {
                *v -= mean;
            }
            for prev in &cols {
                let proj: f64 = c.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (v, pv) in c.iter_mut().zip(prev) {
                    *v -= proj * pv;
                }
            }
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in c.iter_mut() {
                *v /= norm;
            }
            cols.push(c);
        }
        let x = Matrix::from_columns(cols).unwrap();
        let mut rng = seeded_rng(7000 + seed);
        let y: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0)
            .collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let lambda = 0.4 + 0.1 * seed as f64 / 4.0;
        let fit = lasso_fit(&x, &y, lambda, None, &settings).unwrap();
        for j in 0..p {
            let b: f64 = (0..n).map(|i| x.get(i, j) * (y[i] - y_mean)).sum();
            let expected = b.signum() * (b.abs() - lambda / 2.0).max(0.0);
            worst = worst.max((fit.coefficients[j] - expected).abs());
        }
    }
    assert!(worst < 1e-8, "worst deviation {worst:.2e}");
    println!("criterion 02 pass: 20 orthonormal designs, worst deviation {worst:.2e}");
}

#[test]
fn c03_metric_oracles() {
    let y = [1.0, 2.0, 3.0, 4.0];
    assert!((pcc(&y, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    assert!((pve(&y, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.6).abs() < 1e-12);
    assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    assert!((pve(&y, &[2.5; 4]).unwrap()).abs() < 1e-12);
    assert!((pcc(&y, &y).unwrap() - 1.0).abs() < 1e-12);
    assert!((pve(&y, &y).unwrap() - 1.0).abs() < 1e-12);
    assert!((mse(&[0.0, 4.0], &[0.0, 2.0]).unwrap() - 2.0).abs() < 1e-12);
    assert!((mae(&[0.0, 4.0], &[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);

    let mut rng = seeded_rng(42);
    for instance in 0..100 {
        let n = rng.gen_range(4..=200);
        // Coarse score lattice forces plenty of ties.
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..11) as f64 / 10.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.35)).collect();
        labels[0] = true;
        labels[1] = false;
        let fast = auc(&labels, &scores).unwrap();
        let slow = auc_pair_oracle(&labels, &scores);
        assert_eq!(fast, slow, "instance {instance}");
    }
    println!("criterion 03 pass: hand examples exact, 100 AUC instances equal the pair oracle");
}

#[test]
fn c04_forest_predictions_never_leave_the_training_range() {
    let mut rng = seeded_rng(9100);
    let mut checked = 0usize;
    for round in 0..100u64 {
        let n = 40;
        let p = 4;
        let x = random_matrix(n, p, 9200 + round);
        let y: Vec<f64> = (0..n)
            .map(|i| (x.get(i, 0) * 3.0).sin() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cfg = ForestConfig {
            n_trees: 20,
            mtry: 2,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 9300 + round,
        };
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let forest = fit_forest(&x, &y, &cfg, Task::Regression, &names).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..p)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 6.0)
                .collect();
            let pred = predict(&forest, &q).unwrap();
            assert!(
                pred >= lo && pred <= hi,
                "round {round}: {pred} outside [{lo}, {hi}]"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 10_000);
    println!("criterion 04 pass: 10000 forest/query pairs stayed inside the training range");
}

#[test]
fn c05_reports_are_byte_identical_across_thread_counts() {
    let dataset = share_dataset(60, 4, 501);
    let mut config = CvConfig::new(Task::Regression, 4, 777);
    config.repetitions = 3;
    config.k = 5;
    config.mtry_grid = vec![1, 3];
    config.forest.n_trees = 25;
    config.lasso.inner_k = 4;
    config.lasso.n_lambda = 30;

    let mut outputs = Vec::new();
    for threads in [1usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let json = pool.install(|| repeat_cv(&dataset, &config).unwrap().to_json());
        outputs.push((threads, json));
    }
    assert_eq!(outputs[0].1, outputs[1].1, "1 vs 4 threads");
    assert_eq!(outputs[0].1, outputs[2].1, "1 vs 8 threads");
    println!(
        "criterion 05 pass: identical {}-byte reports at 1, 4 and 8 threads",
        outputs[0].1.len()
    );
}

#[test]
fn c06_poisoned_test_folds_leave_training_artifacts_untouched() {
    let dataset = share_dataset(120, 5, 601);
    let mut config = CvConfig::new(Task::Regression, 5, 888);
    config.repetitions = 1;
    config.k = 10;
    config.mtry_grid = vec![2];
    config.forest.n_trees = 30;
    config.lasso.inner_k = 5;
    config.lasso.n_lambda = 40;

    let clean = run_cv(&dataset, &config, 999, 0).unwrap();
    config.leakage_probe = true;
    let poisoned = run_cv(&dataset, &config, 999, 0).unwrap();

    assert_eq!(clean.folds.len(), 10);
    for (a, b) in clean.folds.iter().zip(&poisoned.folds) {
        assert_eq!(a.scaler, b.scaler, "fold {} scaler moved", a.fold);
        assert_eq!(a.lambda, b.lambda, "fold {} lambda moved", a.fold);
        assert_eq!(a.selected, b.selected, "fold {} selection moved", a.fold);
        assert_eq!(
            a.forest_digests, b.forest_digests,
            "fold {} forest changed",
            a.fold
        );
    }
    // The probe must actually have bitten the predictions.
    assert_ne!(clean.matrix.values, poisoned.matrix.values);
    println!(
        "criterion 06 pass: full k=10 run with poisoned test folds, all training artifacts identical"
    );
}

#[test]
fn c07_internal_evaluation_overstates_external_by_a_wide_gap() {
    let (family, elapsed) = gap_family();
    let mut gaps: Vec<f64> = family.iter().map(|s| s.internal_pve - s.cv_pve).collect();
    let mut externals: Vec<f64> = family.iter().map(|s| s.cv_pve).collect();
    let gap_median = median(&mut gaps);
    let external_median = median(&mut externals);
    assert!(
        gap_median > 0.15,
        "median internal-external gap {gap_median:.3}"
    );
    assert!(*elapsed < Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "criterion 07 pass: median gap {gap_median:.3} (external PVE median {external_median:.3}), {elapsed:?}"
    );
}

#[test]
fn c08_forests_beat_the_linear_model_on_nonlinear_signal() {
    let (family, _) = gap_family();
    let wins = family.iter().filter(|s| s.cv_pve > s.lasso_pve).count();
    assert!(wins >= 9, "forest won only {wins}/10 seeds");
    println!(
        "criterion 08 pass: forest external PVE beat the penalized linear model in {wins}/10 seeds"
    );
}

#[test]
fn c09_planted_features_dominate_selection_frequencies() {
    let (report, _) = full_scale_run();
    let freq: std::collections::BTreeMap<&str, f64> = report
        .selection_frequencies
        .iter()
        .map(|s| (s.feature.as_str(), s.frequency))
        .collect();
    assert!(freq["EXP"] > 0.9, "EXP frequency {}", freq["EXP"]);
    assert!(freq["MP"] > 0.9, "MP frequency {}", freq["MP"]);
    let mut spurious: Vec<f64> = report
        .selection_frequencies
        .iter()
        .filter(|s| s.feature != "EXP" && s.feature != "MP")
        .map(|s| s.frequency)
        .collect();
    let spurious_median = median(&mut spurious);
    assert!(
        spurious_median < 0.2,
        "median spurious frequency {spurious_median:.3}"
    );
    assert!(report.most_important.contains(&"EXP".to_string()));
    assert!(report.most_important.contains(&"MP".to_string()));
    println!(
        "criterion 09 pass: planted frequencies EXP {:.2}, MP {:.2}; spurious median {:.3} over {} fits",
        freq["EXP"], freq["MP"], spurious_median, report.selection_fits
    );
}

#[test]
fn c10_pure_noise_demo_reproduces_the_overfitting_curve() {
    let levels = DEFAULT_DEMO_LEVELS;
    let mut last_internal = Vec::new();
    let mut externals_by_level: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    for seed in 0..10u64 {
        let result = leakage_demo(400, 20, &levels, 1234 + seed, DemoFitter::ForestDepth).unwrap();
        last_internal.push(*result.internal_pcc.last().unwrap());
        for (li, &v) in result.external_pve.iter().enumerate() {
            externals_by_level[li].push(v);
        }
    }
    let internal_median = median(&mut last_internal);
    assert!(
        internal_median > 0.8,
        "median internal PCC at max complexity {internal_median:.3}"
    );
    let mut worst_external = f64::NEG_INFINITY;
    for levels in externals_by_level.iter_mut() {
        worst_external = worst_external.max(median(levels));
    }
    assert!(
        worst_external <= 0.05,
        "a level's median external PVE reached {worst_external:.3}"
    );
    println!(
        "criterion 10 pass: median internal PCC {internal_median:.3} at max complexity, worst per-level median external PVE {worst_external:.3}"
    );
}

#[test]
fn c11_bundled_fixture_season_cleans_to_exactly_443_records() {
    let base = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/fixtures/2016-2017");
    let sources = SeasonSources {
        stats: std::fs::File::open(format!("{base}/per-game.csv")).unwrap(),
        salaries: std::fs::File::open(format!("{base}/salaries.csv")).unwrap(),
        payrolls: std::fs::File::open(format!("{base}/payrolls.csv")).unwrap(),
        experience: std::fs::File::open(format!("{base}/experience.csv")).unwrap(),
    };
    let (records, log) = ingest_season(sources, StatKind::PerGame, "2016-2017", 10, 0.05).unwrap();
    assert_eq!(records.len(), 443, "cleaned record count");
    assert_eq!(log.cleaned, 443);

    let mut team_sums: std::collections::BTreeMap<&str, f64> = Default::default();
    for r in &records {
        *team_sums.entry(r.team.as_str()).or_insert(0.0) += r.salary_share.unwrap();
    }
    for (team, total) in &team_sums {
        assert!(*total <= 1.0 + 1e-12, "team {team} shares sum to {total}");
    }

    let corrected: Vec<&str> = log
        .payroll_corrections
        .iter()
        .map(|c| c.team.as_str())
        .collect();
    assert_eq!(corrected, vec!["BRK"], "payroll correction teams");
    println!(
        "criterion 11 pass: 443 cleaned records, all team share sums <= 1, correction fired for BRK only"
    );
}

#[test]
fn c12_full_scale_protocol_fits_the_time_envelope() {
    let (report, elapsed) = full_scale_run();
    assert!(
        *elapsed < Duration::from_secs(30 * 60),
        "full-scale run took {elapsed:?}"
    );
    assert_eq!(report.repetitions, 50);
    assert_eq!(report.k, 10);
    assert_eq!(report.mtry_grid.len(), 5);
    println!(
        "criterion 12 pass: R=50, k=10, 500 trees, 5-point grid completed in {elapsed:?} (best mtry {}, PVE {:.3})",
        report.best_mtry,
        report.best_summary().pve.as_ref().unwrap().mean
    );
}

#[test]
fn c13_real_data_expectations_are_documented() {
    // Informational, data-dependent: with real season snapshots the
    // season-ahead validation is expected near PVE 0.62-0.65,
    // PCC 0.79-0.81 and AUC 0.81-0.84. The bundled fixtures are
    // synthetic, so this criterion checks the documentation only.
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md"))
        .expect("workspace README present");
    for needle in ["0.62", "0.65", "0.79", "0.81", "0.84", "data-dependent"] {
        assert!(
            readme.contains(needle),
            "README should document the expected real-data range ({needle})"
        );
    }
    println!(
        "criterion 13 pass (informational): real-data expectations documented as data-dependent"
    );
}
