//! Prediction-quality metrics: Pearson correlation, proportion of
//! variance explained, mean squared/absolute error, and AUC.
//!
//! PCC and PVE both have a model-free benchmark (mean prediction scores
//! 0) and a maximum of 1, which is why they are preferred over raw MSE
//! or MAE for reporting. AUC uses the rank (Mann-Whitney) formulation
//! with average ranks for ties, which equals exhaustive pair counting.

use crate::error::{Error, Result};

fn check_lengths(y: &[f64], y_hat: &[f64], min: usize) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "observed has {} values, predicted has {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < min {
        return Err(Error::InvalidInput(format!(
            "need at least {min} values, got {}",
            y.len()
        )));
    }
    Ok(())
}

/// Pearson correlation coefficient between observed and predicted values.
pub fn pcc(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 2)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = y_hat.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut ssy = 0.0;
    let mut ssh = 0.0;
    for (a, b) in y.iter().zip(y_hat) {
        cov += (a - my) * (b - mh);
        ssy += (a - my) * (a - my);
        ssh += (b - mh) * (b - mh);
    }
    if ssy == 0.0 || ssh == 0.0 {
        return Err(Error::InvalidInput(
            "correlation undefined for a constant vector".into(),
        ));
    }
    Ok(cov / (ssy.sqrt() * ssh.sqrt()))
}

/// Proportion of variance explained: 1 - SSE/SST.
///
/// Mean prediction scores exactly 0; negative values mean the model
/// predicts worse than the mean and are reported as-is.
pub fn pve(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 2)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (a, b) in y.iter().zip(y_hat) {
        sse += (a - b) * (a - b);
        sst += (a - my) * (a - my);
    }
    if sst == 0.0 {
        return Err(Error::InvalidInput(
            "variance explained undefined for a constant response".into(),
        ));
    }
    Ok(1.0 - sse / sst)
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 1)?;
    let n = y.len() as f64;
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 1)?;
    let n = y.len() as f64;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// Area under the ROC curve via the rank statistic.
///
/// Equals the fraction of (positive, negative) pairs where the positive
/// outscores the negative, ties counted one half. O(n log n).
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks over tied groups, then the Mann-Whitney identity.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn pcc_hand_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!((pcc(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let v = pcc(&y, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
        assert!(pcc(&y, &[2.0; 4]).is_err());
    }

    #[test]
    fn pve_hand_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pve(&y, &[2.5; 4]).unwrap(), 0.0);
        let v = pve(&y, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        assert_eq!(pve(&y, &y).unwrap(), 1.0);
        assert!(pve(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_mae_hand_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.0, 4.0], &[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(mae(&[0.0, 4.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn auc_hand_examples() {
        let labels = [false, false, true, true];
        assert_eq!(auc(&labels, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&labels, &[0.3; 4]).unwrap(), 0.5);
        let v = auc(&labels, &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(auc(&[true, true], &[0.1, 0.2]).is_err());
    }

    /// Exhaustive O(n^2) pair-counting oracle.
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

    #[test]
    fn auc_matches_pair_oracle_with_ties() {
        let mut rng = crate::rng::seeded_rng(11);
        for _ in 0..60 {
            let n = rng.gen_range(4..120);
            // Draw from a tiny discrete set so ties are frequent.
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..7) as f64 / 7.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            let fast = auc(&labels, &scores).unwrap();
            let slow = auc_pair_oracle(&labels, &scores);
            assert_eq!(fast, slow, "rank AUC must equal pair counting exactly");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pcc_affine_invariant(
            ys in proptest::collection::vec(-10.0f64..10.0, 5..30),
            a in 0.1f64..5.0,
            b in -3.0f64..3.0,
        ) {
            let y: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let mapped: Vec<f64> = ys.iter().map(|v| a * v + b).collect();
            if let (Ok(p1), Ok(p2)) = (pcc(&y, &ys), pcc(&y, &mapped)) {
                prop_assert!((p1 - p2).abs() < 1e-9);
            }
        }

        #[test]
        fn pcc_squared_equals_pve_of_affine_adjustment(
            ys in proptest::collection::vec(-10.0f64..10.0, 5..30),
        ) {
            let y: Vec<f64> = (0..ys.len()).map(|i| (i as f64).sin() * 3.0 + i as f64).collect();
            if let Ok(r) = pcc(&y, &ys) {
                // Least-squares affine adjustment of the predictions.
                let n = y.len() as f64;
                let my = y.iter().sum::<f64>() / n;
                let mh = ys.iter().sum::<f64>() / n;
                let cov: f64 = y.iter().zip(&ys).map(|(a, b)| (a - my) * (b - mh)).sum();
                let ssh: f64 = ys.iter().map(|b| (b - mh) * (b - mh)).sum();
                let slope = cov / ssh;
                let adjusted: Vec<f64> = ys.iter().map(|v| my + slope * (v - mh)).collect();
                let v = pve(&y, &adjusted).unwrap();
                prop_assert!((r * r - v).abs() < 1e-9);
            }
        }

        #[test]
        fn pve_never_exceeds_one(
            y in proptest::collection::vec(-10.0f64..10.0, 3..30),
            shift in -5.0f64..5.0,
        ) {
            let y_hat: Vec<f64> = y.iter().map(|v| v + shift).collect();
            if let Ok(v) = pve(&y, &y_hat) {
                prop_assert!(v <= 1.0);
            }
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(-4.0f64..4.0, 6..50),
        ) {
            let labels: Vec<bool> = (0..scores.len()).map(|i| i % 3 == 0).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + s).collect();
            let a = auc(&labels, &scores).unwrap();
            let b = auc(&labels, &transformed).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn auc_complement_under_negation(
            raw in proptest::collection::vec(0u32..1000, 6..50),
        ) {
            // Distinct-ish scores: perturb by index to kill ties.
            let scores: Vec<f64> = raw.iter().enumerate()
                .map(|(i, &v)| v as f64 + i as f64 * 1e-4).collect();
            let labels: Vec<bool> = (0..scores.len()).map(|i| i % 2 == 0).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = auc(&labels, &scores).unwrap();
            let b = auc(&labels, &neg).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
