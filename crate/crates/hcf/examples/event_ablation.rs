//! Does the event input matter? Train the same model twice on one synthetic
//! dataset — once with the event sequence, once blind — and compare rolling
//! CRPS over the holdout through the full file-based workflow.
//!
//! The generator delays each event's level shift by 18 steps, so events near
//! the window end predict shifts the past values cannot see; the event-aware
//! model should score clearly better.
//!
//! Run: `cargo run --release --example event_ablation` (about a minute)

use hcf::cli::{
    cmd_evaluate, cmd_forecast, cmd_synth, cmd_train, EvaluateArgs, ForecastArgs, TrainArgs,
};
use hcf::config::RunConfig;
use hcf::data::SynthConfig;
use hcf::forecast::default_levels;

fn main() -> hcf::Result<()> {
    let dir = std::env::temp_dir().join("hcf_ablation_example");
    let _ = std::fs::remove_dir_all(&dir);

    let synth = SynthConfig {
        length: 2000,
        period: 24.0,
        amplitude: 2.0,
        rate: 0.08,
        magnitudes: vec![3.5, -3.5],
        noise_std: 0.25,
        effect_lag: 18.0,
        seed: 1,
        ..SynthConfig::default()
    };
    let (series, events) = cmd_synth(&synth, &dir)?;

    let config = RunConfig {
        hidden: 16,
        latent: 8,
        elbo_samples: 1,
        t_past: 48,
        horizon: 24,
        epochs: 20,
        batch_size: 8,
        learning_rate: 0.005,
        steps_per_epoch: Some(25),
        holdout: 360,
        num_samples: 200,
        seed: 1,
        ..RunConfig::default()
    };

    let mut crps = Vec::new();
    for use_events in [true, false] {
        let tag = if use_events {
            "with_events"
        } else {
            "series_only"
        };
        println!("training {tag} ...");
        let ckpt = dir.join(format!("{tag}.ckpt"));
        cmd_train(&TrainArgs {
            series: series.clone(),
            events: use_events.then(|| events.clone()),
            checkpoint: ckpt.clone(),
            trace: None,
            resume: false,
            verbose: false,
            config: config.clone(),
        })?;

        let fc_dir = dir.join(format!("fc_{tag}"));
        let files = cmd_forecast(&ForecastArgs {
            checkpoint: ckpt,
            series: series.clone(),
            events: use_events.then(|| events.clone()),
            out_dir: fc_dir.clone(),
            origin: None,
            rolling: true,
            horizon: None,
            emit_samples: true,
            mean_feedback: false,
            config: config.clone(),
        })?;
        let report = cmd_evaluate(&EvaluateArgs {
            forecast_dir: fc_dir,
            truth: series.clone(),
            out_dir: dir.join(format!("eval_{tag}")),
            levels: default_levels(),
        })?;
        println!(
            "  {tag}: {} rolling windows, crps {:.4}, rmse {:.4}, calibration R² {:.3}",
            files.len(),
            report.crps,
            report.rmse,
            report.calibration_r2
        );
        crps.push(report.crps);
    }
    println!(
        "\nCRPS ratio (with events / series only): {:.3}",
        crps[0] / crps[1]
    );
    println!("working files under {}", dir.display());
    Ok(())
}
