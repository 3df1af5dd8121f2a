//! Stochastic training loop: batches sampled with replacement, one tape per
//! batch element, gradients averaged into the store, Adam updates.

use crate::error::{Error, Result};
use crate::model::{elbo, Model, TrainingSample};
use crate::rng::StreamRng;
use crate::tape::Tape;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Optimizer steps per epoch; defaults to ⌈windows / batch⌉.
    pub steps_per_epoch: Option<usize>,
    /// Global index of the first epoch; resumed runs continue the stream
    /// labels where the previous run stopped.
    pub first_epoch: usize,
    /// Report per-epoch losses on stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.001,
            steps_per_epoch: None,
            first_epoch: 0,
            verbose: false,
        }
    }
}

/// Per-epoch mean negative objective values.
#[derive(Clone, Debug, Default)]
pub struct TrainTrace {
    pub epoch_neg_elbo: Vec<f64>,
}

/// Train in place. Fixed seed plus fixed data gives an identical trace and
/// identical parameters; a non-finite loss aborts with the offending batch.
pub fn train(
    model: &mut Model,
    data: &[TrainingSample],
    opts: &TrainOptions,
    rng: &StreamRng,
) -> Result<TrainTrace> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let k = model.config.elbo_samples;
    if k == 0 {
        return Err(Error::Config("elbo_samples must be positive".into()));
    }
    let steps = opts
        .steps_per_epoch
        .unwrap_or_else(|| data.len().div_ceil(opts.batch_size))
        .max(1);
    let latent = model.config.latent;
    let batch_root = rng.split("batches");
    let noise_root = rng.split("noise");

    let mut trace = TrainTrace::default();
    for local_epoch in 0..opts.epochs {
        let epoch = opts.first_epoch + local_epoch;
        let mut batch_rng = batch_root.split(&format!("e{epoch}"));
        let mut epoch_sum = 0.0;
        let mut epoch_count = 0usize;
        for step in 0..steps {
            for b in 0..opts.batch_size {
                let idx = batch_rng.index(data.len());
                let sample = &data[idx];
                let mut noise = noise_root.split(&format!("e{epoch}.s{step}.b{b}"));
                let eps: Vec<Tensor> = (0..k)
                    .map(|_| Tensor::vector(noise.normal_vec(latent)))
                    .collect();

                let tape = Tape::new();
                let objective = elbo(&tape, model, sample, &eps)?;
                let neg = -objective.item();
                if !neg.is_finite() {
                    return Err(Error::TrainAbort {
                        epoch: epoch + 1,
                        step: step + 1,
                        element: b,
                        origin: sample.window.origin,
                    });
                }
                epoch_sum += neg;
                epoch_count += 1;
                // Maximize the objective: descend on −elbo / batch.
                let root = objective.scale(-1.0 / opts.batch_size as f64);
                tape.backward(root, &mut model.store)?;
            }
            model
                .store
                .adam_step(opts.learning_rate, 0.9, 0.999, 1e-8)?;
        }
        let mean_neg = epoch_sum / epoch_count as f64;
        if opts.verbose {
            eprintln!("epoch {:>4}  neg_elbo {mean_neg:.6}", epoch + 1);
        }
        trace.epoch_neg_elbo.push(mean_neg);
    }
    Ok(trace)
}
