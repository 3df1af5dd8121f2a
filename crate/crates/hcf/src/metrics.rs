//! Forecast evaluation: continuous ranked probability score (exact Gaussian
//! form and the exact integral over an empirical sample CDF), RMSE, MAE,
//! one-sided coverage curves, and the calibration R² against the diagonal.
//! All scores are computed on the original scale of the data.

use std::fmt::Write as _;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::forecast::quantile_sorted;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_PI: f64 = 0.5641895835477563; // 1/√π
const INV_SQRT_2PI: f64 = 0.3989422804014327; // 1/√(2π)

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * INV_SQRT_2PI
}

/// Exact CRPS of a Gaussian forecast N(μ, σ²) against observation `x`:
/// σ·{ z(2Φ(z) − 1) + 2φ(z) − 1/√π } with z = (x − μ)/σ.
pub fn crps_gaussian(mu: f64, sigma: f64, x: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Data(format!(
            "crps_gaussian needs σ > 0, got {sigma}"
        )));
    }
    let z = (x - mu) / sigma;
    Ok(sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - INV_SQRT_PI))
}

/// Exact CRPS of the empirical distribution of `samples` against `x`:
/// the piecewise-closed-form integral ∫ (F(y) − 1{y ≥ x})² dy over the step
/// CDF. Equals the energy form mean|X−x| − ½·mean|X−X′|.
pub fn crps_empirical(samples: &[f64], x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Data(
            "crps_empirical needs at least one sample".into(),
        ));
    }
    let m = samples.len() as f64;
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut knots = sorted.clone();
    knots.push(x);
    knots.sort_by(f64::total_cmp);

    // On each open interval between adjacent knots both the CDF and the
    // step indicator are constant.
    let mut acc = 0.0;
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a {
            let below = sorted.partition_point(|&s| s <= a);
            let f = below as f64 / m;
            let h = if a >= x { 1.0 } else { 0.0 };
            acc += (f - h) * (f - h) * (b - a);
        }
    }
    Ok(acc)
}

/// Mean CRPS over aligned per-variable sample sets and truths.
pub fn crps_average(samples_per_cell: &[Vec<f64>], truths: &[f64]) -> Result<f64> {
    if samples_per_cell.len() != truths.len() {
        return Err(Error::Data(format!(
            "crps_average length mismatch: {} forecasts vs {} truths",
            samples_per_cell.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::Data("crps_average needs at least one cell".into()));
    }
    let mut acc = 0.0;
    for (s, &t) in samples_per_cell.iter().zip(truths) {
        acc += crps_empirical(s, t)?;
    }
    Ok(acc / truths.len() as f64)
}

/// √(mean squared error) over flattened aligned buffers.
pub fn rmse(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::Data(format!(
            "rmse shape mismatch: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    let acc: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| (t - p) * (t - p))
        .sum();
    Ok((acc / truth.len() as f64).sqrt())
}

pub fn mae(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::Data(format!(
            "mae shape mismatch: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    let acc: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| (t - p).abs())
        .sum();
    Ok(acc / truth.len() as f64)
}

/// One-sided coverage: for each level p, the fraction of cells whose truth
/// lies at or below the empirical p-quantile of that cell's samples.
pub fn coverage_curve(
    samples_per_cell: &[Vec<f64>],
    truths: &[f64],
    levels: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if samples_per_cell.len() != truths.len() || truths.is_empty() {
        return Err(Error::Data("coverage needs aligned, nonempty cells".into()));
    }
    for p in levels {
        if !(0.0 < *p && *p < 1.0) {
            return Err(Error::Data(format!("coverage level {p} outside (0,1)")));
        }
    }
    let sorted: Vec<Vec<f64>> = samples_per_cell
        .iter()
        .map(|s| {
            let mut v = s.clone();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let n = truths.len() as f64;
    Ok(levels
        .iter()
        .map(|&p| {
            let hits = sorted
                .iter()
                .zip(truths)
                .filter(|(s, &t)| t <= quantile_sorted(s, p))
                .count();
            (p, hits as f64 / n)
        })
        .collect())
}

/// R² of a coverage curve against the perfect-calibration diagonal:
/// 1 − Σ(cᵢ − pᵢ)² / Σ(pᵢ − p̄)². May be negative for badly calibrated
/// forecasts; errors when the level grid is degenerate.
pub fn calibration_r2(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::Data(
            "calibration R² needs at least two points".into(),
        ));
    }
    let p_bar = curve.iter().map(|(p, _)| p).sum::<f64>() / curve.len() as f64;
    let ss_tot: f64 = curve.iter().map(|(p, _)| (p - p_bar) * (p - p_bar)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::Data(
            "calibration R² is degenerate: identical levels".into(),
        ));
    }
    let ss_res: f64 = curve.iter().map(|(p, c)| (c - p) * (c - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Per-variable score triple.
#[derive(Clone, Debug)]
pub struct VariableScores {
    pub name: String,
    pub rmse: f64,
    pub crps: f64,
    pub mae: f64,
}

/// Aggregate evaluation result over a set of forecast windows.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub windows: usize,
    pub cells: usize,
    pub rmse: f64,
    pub crps: f64,
    pub mae: f64,
    pub calibration_r2: f64,
    pub coverage: Vec<(f64, f64)>,
    pub per_variable: Vec<VariableScores>,
}

impl EvalReport {
    /// Flat key-value rendering with a stable key order.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        writeln!(out, "windows={}", self.windows).unwrap();
        writeln!(out, "cells={}", self.cells).unwrap();
        writeln!(out, "rmse={}", self.rmse).unwrap();
        writeln!(out, "crps={}", self.crps).unwrap();
        writeln!(out, "mae={}", self.mae).unwrap();
        writeln!(out, "calibration_r2={}", self.calibration_r2).unwrap();
        for v in &self.per_variable {
            writeln!(out, "rmse.{}={}", v.name, v.rmse).unwrap();
            writeln!(out, "crps.{}={}", v.name, v.crps).unwrap();
            writeln!(out, "mae.{}={}", v.name, v.mae).unwrap();
        }
        out
    }

    /// `p,coverage` rows for the calibration curve file.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("p,coverage\n");
        for (p, c) in &self.coverage {
            writeln!(out, "{p},{c}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    #[test]
    fn crps_gaussian_at_center() {
        // x = μ: σ(2φ(0) − 1/√π) = σ(√(2/π) − 1/√π)
        let got = crps_gaussian(0.0, 1.0, 0.0).unwrap();
        let expect = 2.0 * INV_SQRT_2PI - INV_SQRT_PI;
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.2336949772551).abs() < 1e-10, "{got}");
    }

    #[test]
    fn crps_gaussian_tight_sigma_approaches_absolute_error() {
        let got = crps_gaussian(1.0, 1e-8, 3.0).unwrap();
        assert!((got - 2.0).abs() < 1e-6, "{got}");
    }

    #[test]
    fn crps_gaussian_is_even_in_the_error() {
        for a in [0.3, 1.7, 2.4] {
            let up = crps_gaussian(0.5, 1.3, 0.5 + a).unwrap();
            let down = crps_gaussian(0.5, 1.3, 0.5 - a).unwrap();
            assert!((up - down).abs() < 1e-12);
        }
    }

    #[test]
    fn crps_gaussian_rejects_bad_sigma() {
        assert!(crps_gaussian(0.0, 0.0, 1.0).is_err());
        assert!(crps_gaussian(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn crps_empirical_point_mass_is_absolute_error() {
        assert!((crps_empirical(&[2.0, 2.0, 2.0], 5.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((crps_empirical(&[2.0, 2.0, 2.0], 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crps_empirical_two_sample_case() {
        assert!((crps_empirical(&[0.0, 1.0], 0.0).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn crps_empirical_matches_energy_form() {
        let mut rng = StreamRng::from_seed(17);
        for _ in 0..300 {
            let m = 1 + rng.index(12);
            let samples: Vec<f64> = (0..m).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
            let x = rng.uniform_in(-5.0, 5.0);
            let integral = crps_empirical(&samples, x).unwrap();
            // Independent route: mean|X−x| − 1/(2m²)·ΣΣ|Xᵢ−Xⱼ|
            let mf = m as f64;
            let term1: f64 = samples.iter().map(|s| (s - x).abs()).sum::<f64>() / mf;
            let mut term2 = 0.0;
            for a in &samples {
                for b in &samples {
                    term2 += (a - b).abs();
                }
            }
            term2 /= 2.0 * mf * mf;
            assert!(
                (integral - (term1 - term2)).abs() < 1e-10,
                "integral {integral} vs energy {}",
                term1 - term2
            );
        }
    }

    #[test]
    fn crps_empirical_converges_to_gaussian_crps() {
        let mut rng = StreamRng::from_seed(23);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        let emp = crps_empirical(&samples, 0.0).unwrap();
        let exact = crps_gaussian(0.0, 1.0, 0.0).unwrap();
        assert!((emp - exact).abs() < 0.01, "emp {emp}, exact {exact}");
    }

    #[test]
    fn crps_average_reduces_to_mae_for_deterministic_forecasts() {
        let forecasts = vec![vec![1.0], vec![4.0], vec![-2.0]];
        let truths = [2.0, 2.0, 2.0];
        let got = crps_average(&forecasts, &truths).unwrap();
        let expect = (1.0 + 2.0 + 4.0) / 3.0;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn crps_average_single_variable_and_permutation_invariance() {
        let forecasts = vec![vec![0.0, 1.0, 2.0]];
        let truths = [1.0];
        let single = crps_average(&forecasts, &truths).unwrap();
        assert!((single - crps_empirical(&forecasts[0], 1.0).unwrap()).abs() < 1e-15);

        let a = vec![vec![0.0, 1.0], vec![5.0, 6.0], vec![-1.0, 2.0]];
        let ta = [0.5, 5.5, 1.0];
        let b = vec![a[2].clone(), a[0].clone(), a[1].clone()];
        let tb = [ta[2], ta[0], ta[1]];
        assert!((crps_average(&a, &ta).unwrap() - crps_average(&b, &tb).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let got = rmse(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_matches_double_loop_oracle() {
        let mut rng = StreamRng::from_seed(31);
        let tau = 7;
        let d = 3;
        let truth: Vec<f64> = (0..tau * d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let pred: Vec<f64> = (0..tau * d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let got = rmse(&truth, &pred).unwrap();
        let mut acc = 0.0;
        for t in 0..tau {
            for j in 0..d {
                let diff = truth[t * d + j] - pred[t * d + j];
                acc += diff * diff;
            }
        }
        let expect = (acc / (tau * d) as f64).sqrt();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn coverage_extremes() {
        let samples = vec![vec![1.0, 2.0, 3.0]; 5];
        let below = [0.0; 5];
        let above = [9.0; 5];
        let levels = [0.1, 0.5, 0.9];
        for (_, c) in coverage_curve(&samples, &below, &levels).unwrap() {
            assert_eq!(c, 1.0);
        }
        for (_, c) in coverage_curve(&samples, &above, &levels).unwrap() {
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn coverage_is_monotone_in_the_level() {
        let mut rng = StreamRng::from_seed(77);
        let cells: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..25).map(|_| rng.uniform_in(-2.0, 2.0)).collect())
            .collect();
        let truths: Vec<f64> = (0..40).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let levels: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let curve = coverage_curve(&cells, &truths, &levels).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn coverage_of_exchangeable_truths_is_near_diagonal() {
        let mut rng = StreamRng::from_seed(41);
        let n = 4000;
        let cells: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..199).map(|_| rng.standard_normal()).collect())
            .collect();
        let truths: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for &p in &[0.1, 0.5, 0.9] {
            let curve = coverage_curve(&cells, &truths, &[p]).unwrap();
            let c = curve[0].1;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c - p).abs() < 3.0 * se, "p {p}, coverage {c}");
        }
    }

    #[test]
    fn r2_of_perfect_curve_is_one() {
        let curve: Vec<(f64, f64)> = (1..10)
            .map(|i| (i as f64 / 10.0, i as f64 / 10.0))
            .collect();
        assert!((calibration_r2(&curve).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn r2_of_flat_curve_at_half_is_zero() {
        // Constant coverage 0.5 over p ∈ {0.1,…,0.9}: SS_res equals the
        // spread of the diagonal, so R² is exactly 0.
        let curve: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 / 10.0, 0.5)).collect();
        let r2 = calibration_r2(&curve).unwrap();
        assert!(r2.abs() < 1e-12, "{r2}");
    }

    #[test]
    fn r2_can_be_negative() {
        // Anti-calibrated: coverage decreasing in p.
        let curve: Vec<(f64, f64)> = (1..10)
            .map(|i| (i as f64 / 10.0, 1.0 - i as f64 / 10.0))
            .collect();
        assert!(calibration_r2(&curve).unwrap() < 0.0);
    }

    #[test]
    fn r2_degenerate_grid_is_an_error() {
        assert!(calibration_r2(&[(0.5, 0.4), (0.5, 0.6)]).is_err());
        assert!(calibration_r2(&[(0.5, 0.5)]).is_err());
    }

    /// Scaling the data scales CRPS and RMSE by the same factor: both are
    /// reported in original units.
    #[test]
    fn scores_scale_with_the_data() {
        let mut rng = StreamRng::from_seed(53);
        let cells: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..30).map(|_| rng.uniform_in(-1.0, 3.0)).collect())
            .collect();
        let truths: Vec<f64> = (0..20).map(|_| rng.uniform_in(-1.0, 3.0)).collect();
        let means: Vec<f64> = cells
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();

        let crps1 = crps_average(&cells, &truths).unwrap();
        let rmse1 = rmse(&truths, &means).unwrap();
        let cells10: Vec<Vec<f64>> = cells
            .iter()
            .map(|c| c.iter().map(|v| v * 10.0).collect())
            .collect();
        let truths10: Vec<f64> = truths.iter().map(|v| v * 10.0).collect();
        let means10: Vec<f64> = means.iter().map(|v| v * 10.0).collect();
        let crps10 = crps_average(&cells10, &truths10).unwrap();
        let rmse10 = rmse(&truths10, &means10).unwrap();
        assert!((crps10 - 10.0 * crps1).abs() < 1e-9);
        assert!((rmse10 - 10.0 * rmse1).abs() < 1e-9);
    }
}
