//! Gaussian kernel density estimation for the salary-share
//! distribution figure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.3989422804014327;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

impl KdeCurve {
    /// Trapezoid integral of the curve over its grid.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for w in self.grid.windows(2).zip(self.density.windows(2)) {
            let (g, d) = w;
            total += (g[1] - g[0]) * (d[0] + d[1]) / 2.0;
        }
        total
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn interquartile_range(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    q(0.75) - q(0.25)
}

/// Resolve the bandwidth for a sample.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    let sd = sample_sd(values);
    let iqr = interquartile_range(values);
    let mut spread = sd;
    if iqr > 0.0 {
        spread = spread.min(iqr / 1.34);
    }
    if spread <= 0.0 {
        // Degenerate sample; any positive width gives a valid curve.
        return 1.0;
    }
    0.9 * spread * (values.len() as f64).powf(-0.2)
}

/// Evaluate the Gaussian-kernel density estimate on an explicit grid.
pub fn kde(values: &[f64], bandwidth: Bandwidth, grid: &[f64]) -> Result<KdeCurve> {
    if values.is_empty() {
        return Err(Error::InvalidInput("kde needs a nonempty sample".into()));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values),
        Bandwidth::Fixed(h) => h,
    };
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let n = values.len() as f64;
    let density = grid
        .iter()
        .map(|&x| {
            values
                .iter()
                .map(|&xi| {
                    let z = (x - xi) / h;
                    INV_SQRT_2PI * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                / (n * h)
        })
        .collect();
    Ok(KdeCurve {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
        n: values.len(),
    })
}

/// KDE on an automatic grid spanning the data plus three bandwidths on
/// each side.
pub fn kde_auto_grid(values: &[f64], bandwidth: Bandwidth, n_points: usize) -> Result<KdeCurve> {
    if values.is_empty() {
        return Err(Error::InvalidInput("kde needs a nonempty sample".into()));
    }
    if n_points < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 points".into()));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values),
        Bandwidth::Fixed(h) => h,
    };
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (n_points - 1) as f64;
    let grid: Vec<f64> = (0..n_points).map(|i| lo + step * i as f64).collect();
    kde(values, Bandwidth::Fixed(h), &grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn single_value_peaks_symmetrically() {
        let curve = kde_auto_grid(&[2.5], Bandwidth::Auto, 201).unwrap();
        let peak = curve
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((curve.grid[peak] - 2.5).abs() < 1e-9);
        let k = curve.density.len();
        for i in 0..k / 2 {
            assert!((curve.density[i] - curve.density[k - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_standard_normal_density() {
        let mut rng = crate::rng::seeded_rng(99);
        let sample: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let grid: Vec<f64> = (-60..=60).map(|i| i as f64 / 20.0).collect();
        let curve = kde(&sample, Bandwidth::Auto, &grid).unwrap();
        let max_err = curve
            .grid
            .iter()
            .zip(&curve.density)
            .map(|(&x, &d)| {
                let truth = INV_SQRT_2PI * (-0.5 * x * x).exp();
                (d - truth).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_err < 0.05, "sup error {max_err}");
    }

    #[test]
    fn integrates_to_one() {
        let mut rng = crate::rng::seeded_rng(7);
        let sample: Vec<f64> = (0..800)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.04 + 0.06)
            .collect();
        let curve = kde_auto_grid(&sample, Bandwidth::Auto, 512).unwrap();
        assert!(
            (curve.integral() - 1.0).abs() < 1e-3,
            "{}",
            curve.integral()
        );
    }

    #[test]
    fn rejects_bad_bandwidth_and_empty_sample() {
        assert!(kde(&[1.0], Bandwidth::Fixed(0.0), &[0.0]).is_err());
        assert!(kde(&[1.0], Bandwidth::Fixed(-1.0), &[0.0]).is_err());
        assert!(kde(&[], Bandwidth::Auto, &[0.0]).is_err());
    }
}
