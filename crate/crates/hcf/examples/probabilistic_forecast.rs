//! Train a compact model, then draw a Monte-Carlo forecast ensemble and
//! print the mean with quantile bands next to the realized values.
//!
//! Run: `cargo run --release --example probabilistic_forecast`

use hcf::cli::prepare_training;
use hcf::data::{align_events, synthesize, window_at, SynthConfig};
use hcf::forecast::{forecast, ForecastOptions};
use hcf::model::{train, Model, ModelConfig, TrainOptions};
use hcf::rng::StreamRng;

fn main() -> hcf::Result<()> {
    let synth = SynthConfig {
        length: 1200,
        rate: 0.08,
        magnitudes: vec![3.5, -3.5],
        effect_lag: 18.0,
        noise_std: 0.25,
        seed: 3,
        ..SynthConfig::default()
    };
    let (series, events) = synthesize(&synth, &StreamRng::from_seed(synth.seed))?;

    let cfg = ModelConfig {
        dim: 1,
        num_event_types: 2,
        hidden: 16,
        latent: 8,
        elbo_samples: 1,
        t_past: 48,
        horizon: 24,
        std_floor: 1e-4,
    };
    // Hold out the last day for comparison.
    let train_len = series.len() - cfg.horizon;
    let (data, scaler, anchor) =
        prepare_training(&series, Some(&events), cfg.t_past, cfg.horizon, train_len)?;

    let mut model = Model::init(cfg.clone(), &StreamRng::from_seed(3).split("init"))?;
    let opts = TrainOptions {
        epochs: 20,
        batch_size: 8,
        learning_rate: 0.005,
        steps_per_epoch: Some(25),
        ..TrainOptions::default()
    };
    train(
        &mut model,
        &data,
        &opts,
        &StreamRng::from_seed(3).split("train"),
    )?;

    // Forecast the held-out day from the point just before it.
    let origin = train_len - cfg.t_past + 1;
    let window = window_at(
        &series,
        &scaler,
        &anchor,
        origin,
        cfg.t_past,
        cfg.horizon,
        false,
    )?;
    let ev = align_events(&events, &window, &anchor, None)?;
    let fopts = ForecastOptions {
        num_samples: 500,
        levels: vec![0.05, 0.25, 0.5, 0.75, 0.95],
        mean_feedback: false,
        zero_noise: false,
    };
    let ensemble = forecast(
        &model,
        &scaler,
        &window,
        &ev,
        cfg.horizon,
        &fopts,
        &StreamRng::from_seed(3).split("forecast"),
    )?;

    println!("step   truth     mean    [q05   q25   q50   q75   q95]   in 90%?");
    let mut hits = 0;
    for j in 0..cfg.horizon {
        let truth = series.value(train_len + j, 0);
        let inside =
            truth >= ensemble.quantile_at(0, j, 0) && truth <= ensemble.quantile_at(4, j, 0);
        hits += inside as usize;
        println!(
            "{:>4}  {truth:>6.2}  {:>7.2}   [{:>5.2} {:>5.2} {:>5.2} {:>5.2} {:>5.2}]   {}",
            j + 1,
            ensemble.mean_at(j, 0),
            ensemble.quantile_at(0, j, 0),
            ensemble.quantile_at(1, j, 0),
            ensemble.quantile_at(2, j, 0),
            ensemble.quantile_at(3, j, 0),
            ensemble.quantile_at(4, j, 0),
            if inside { "yes" } else { "NO" }
        );
    }
    println!(
        "{hits}/{} realized values inside the central 90% band",
        cfg.horizon
    );
    Ok(())
}
