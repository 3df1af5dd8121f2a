//! Verify the reverse-mode gradients of the full variational objective
//! against central finite differences, parameter by parameter.
//!
//! Run: `cargo run --release --example gradient_check`

use hcf::cli::prepare_training;
use hcf::data::{synthesize, SynthConfig};
use hcf::gradcheck::finite_diff_check;
use hcf::model::{elbo, Model, ModelConfig};
use hcf::rng::StreamRng;
use hcf::tensor::Tensor;

fn main() -> hcf::Result<()> {
    let cfg = ModelConfig {
        dim: 1,
        num_event_types: 2,
        hidden: 8,
        latent: 4,
        elbo_samples: 1,
        t_past: 12,
        horizon: 4,
        std_floor: 1e-4,
    };
    let synth = SynthConfig {
        length: 120,
        rate: 0.1,
        noise_std: 0.2,
        seed: 1,
        ..SynthConfig::default()
    };
    let (series, events) = synthesize(&synth, &StreamRng::from_seed(1))?;
    let (samples, _, _) = prepare_training(
        &series,
        Some(&events),
        cfg.t_past,
        cfg.horizon,
        series.len(),
    )?;
    let sample = samples.into_iter().next().unwrap();

    let model = Model::init(cfg.clone(), &StreamRng::from_seed(2))?;
    println!(
        "checking d(objective)/dθ for {} parameters in {} tensors",
        model.store.num_scalars(),
        model.store.len()
    );

    // Fixed latent noise makes the objective deterministic, so central
    // differences are valid.
    let mut noise = StreamRng::from_seed(3);
    let eps = [Tensor::vector(noise.normal_vec(cfg.latent))];
    let mut store = model.store.clone();
    let report = finite_diff_check(&mut store, 1e-5, |tape, s| {
        let m = Model {
            config: cfg.clone(),
            store: s.clone(),
        };
        elbo(tape, &m, &sample, &eps)
    })?;

    let mut rows = report.per_param.clone();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("worst relative errors:");
    for (name, err) in rows.iter().take(8) {
        println!("  {name:<16} {err:.3e}");
    }
    println!("max over all parameters: {:.3e}", report.max_rel_err);
    assert!(report.max_rel_err < 1e-4);
    println!("all gradients agree with finite differences within 1e-4");
    Ok(())
}
