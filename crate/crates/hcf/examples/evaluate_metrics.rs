//! The evaluation toolkit on hand-made forecasts: exact Gaussian CRPS,
//! empirical-CDF CRPS, RMSE/MAE, a coverage curve, and calibration R².
//!
//! Run: `cargo run --example evaluate_metrics`

use hcf::metrics::{calibration_r2, coverage_curve, crps_empirical, crps_gaussian, mae, rmse};
use hcf::rng::StreamRng;

fn main() -> hcf::Result<()> {
    // Exact Gaussian CRPS and its sampling counterpart.
    let exact = crps_gaussian(0.0, 1.0, 0.5)?;
    let mut rng = StreamRng::from_seed(5);
    let samples: Vec<f64> = (0..50_000).map(|_| rng.standard_normal()).collect();
    let empirical = crps_empirical(&samples, 0.5)?;
    println!("CRPS of N(0,1) against x=0.5: exact {exact:.5}, from 50k samples {empirical:.5}");

    // A deterministic forecast scores its absolute error.
    let det = crps_empirical(&[2.0], 3.25)?;
    println!("deterministic forecast 2.0 vs truth 3.25: CRPS {det} (= MAE)");

    // Point metrics.
    let truth = [1.0, 2.0, 3.0, 4.0];
    let pred = [1.2, 1.9, 3.3, 3.6];
    println!(
        "rmse {:.4}, mae {:.4}",
        rmse(&truth, &pred)?,
        mae(&truth, &pred)?
    );

    // Coverage and calibration: a well-calibrated forecaster (samples from
    // the truth's own distribution) against an overconfident one.
    let levels: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let n_cells = 2000;
    let calibrated: Vec<Vec<f64>> = (0..n_cells)
        .map(|_| (0..99).map(|_| rng.standard_normal()).collect())
        .collect();
    let overconfident: Vec<Vec<f64>> = (0..n_cells)
        .map(|_| (0..99).map(|_| 0.3 * rng.standard_normal()).collect())
        .collect();
    let truths: Vec<f64> = (0..n_cells).map(|_| rng.standard_normal()).collect();

    let good = coverage_curve(&calibrated, &truths, &levels)?;
    let bad = coverage_curve(&overconfident, &truths, &levels)?;
    println!("\n   p   calibrated  overconfident");
    for ((p, c1), (_, c2)) in good.iter().zip(&bad).step_by(3) {
        println!("{p:>5.2}   {c1:>8.3}     {c2:>8.3}");
    }
    println!(
        "calibration R²: calibrated {:.3}, overconfident {:.3}",
        calibration_r2(&good)?,
        calibration_r2(&bad)?
    );
    Ok(())
}
