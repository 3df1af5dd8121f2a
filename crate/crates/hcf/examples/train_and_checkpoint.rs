//! Train a small model on synthetic data, watch the objective fall, save a
//! checkpoint bundle, and verify the reload is bit-exact.
//!
//! Run: `cargo run --release --example train_and_checkpoint`

use hcf::cli::prepare_training;
use hcf::data::{synthesize, FeatureAnchor, Scaler, SynthConfig};
use hcf::model::{train, Model, ModelBundle, ModelConfig, TrainOptions};
use hcf::rng::StreamRng;

fn main() -> hcf::Result<()> {
    let synth = SynthConfig {
        length: 600,
        rate: 0.08,
        effect_lag: 18.0,
        seed: 11,
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
    let (data, scaler, anchor) = prepare_training(
        &series,
        Some(&events),
        cfg.t_past,
        cfg.horizon,
        series.len(),
    )?;
    println!("{} training windows, {} parameters", data.len(), {
        let m = Model::init(cfg.clone(), &StreamRng::from_seed(0))?;
        m.store.num_scalars()
    });

    let mut model = Model::init(cfg, &StreamRng::from_seed(11).split("init"))?;
    let opts = TrainOptions {
        epochs: 10,
        batch_size: 8,
        learning_rate: 0.005,
        steps_per_epoch: Some(20),
        verbose: false,
        ..TrainOptions::default()
    };
    let trace = train(
        &mut model,
        &data,
        &opts,
        &StreamRng::from_seed(11).split("train"),
    )?;
    for (i, v) in trace.epoch_neg_elbo.iter().enumerate() {
        println!("epoch {:>2}  mean negative objective {v:>8.3}", i + 1);
    }

    // Persist everything a forecast needs and check the round trip.
    let dir = std::env::temp_dir().join("hcf_train_example");
    std::fs::create_dir_all(&dir)?;
    let ckpt = dir.join("model.ckpt");
    let bundle = ModelBundle {
        model,
        scaler: Scaler {
            means: scaler.means.clone(),
            stds: scaler.stds.clone(),
        },
        anchor: FeatureAnchor {
            start_epoch: anchor.start_epoch,
            span_seconds: anchor.span_seconds,
        },
        step_seconds: series.step_seconds,
        variable_names: series.variable_names.clone(),
        event_type_names: events.type_names.clone(),
        epochs_trained: opts.epochs,
    };
    bundle.save(&ckpt)?;
    let reloaded = ModelBundle::load(&ckpt)?;
    let name = "obs_mean.w2";
    let a = bundle.model.store.value(name).unwrap();
    let b = reloaded.model.store.value(name).unwrap();
    assert!(a
        .data()
        .iter()
        .zip(b.data())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    println!("checkpoint round trip is bit-exact: {}", ckpt.display());
    Ok(())
}
