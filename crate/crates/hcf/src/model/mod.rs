//! The conditional generative model: hybrid recurrent encoders over the
//! heterogeneous past, diagonal-Gaussian prior and recognition heads, a
//! stochastic recurrent decoder with a constrained Gaussian observation
//! head, the variational objective, and the training loop.

mod bundle;
mod elbo;
mod net;
mod train;

pub use bundle::ModelBundle;
pub use elbo::{elbo, elbo_with_rng};
pub use net::{ObsVar, RnnCell};
pub use train::{train, TrainOptions, TrainTrace};

use std::cell::RefCell;
use std::collections::HashMap;

use crate::data::{EventWindow, TimeSeriesWindow, TEMPORAL_FEATURES};
use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::rng::StreamRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Model hyperparameters. Defaults follow the reference configuration:
/// hidden width 100, latent dimension 50, 5 objective samples, one week of
/// hourly history (168 points), one day ahead (24 points).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Series dimension D.
    pub dim: usize,
    /// Event type count C.
    pub num_event_types: usize,
    /// Width of every recurrent cell and MLP hidden layer.
    pub hidden: usize,
    /// Latent code dimension.
    pub latent: usize,
    /// Monte-Carlo sample count K in the objective.
    pub elbo_samples: usize,
    pub t_past: usize,
    pub horizon: usize,
    /// Additive floor under every softplus-constrained standard deviation.
    pub std_floor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 1,
            num_event_types: 2,
            hidden: 100,
            latent: 50,
            elbo_samples: 5,
            t_past: 168,
            horizon: 24,
            std_floor: 1e-4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.num_event_types == 0
            || self.hidden == 0
            || self.latent == 0
            || self.t_past == 0
            || self.horizon == 0
        {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.std_floor.is_nan() || self.std_floor <= 0.0 {
            return Err(Error::Config("std_floor must be positive".into()));
        }
        Ok(())
    }
}

/// The model: a config plus its named parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParameterStore,
}

/// Expected parameter names and shapes for a config, in registration order.
pub fn parameter_spec(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = cfg.hidden;
    let mut spec: Vec<(String, Vec<usize>)> = Vec::new();
    let mut affine = |name: &str, out: usize, inp: usize| {
        spec.push((format!("{name}.w"), vec![out, inp]));
        spec.push((format!("{name}.b"), vec![out]));
    };
    // Feature extractors (affine + tanh, width h).
    affine("phi", h, cfg.dim);
    affine("psi", h, TEMPORAL_FEATURES);
    affine("zeta", h, cfg.num_event_types);
    // Recurrent cells: series/decoder take [phi, psi]; events add the
    // inter-event duration scalar.
    for (name, input) in [("ts_rnn", 2 * h), ("ev_rnn", 2 * h + 1), ("dec_rnn", 2 * h)] {
        for gate in ["r", "z", "c"] {
            spec.push((format!("{name}.w{gate}"), vec![h, input]));
            spec.push((format!("{name}.u{gate}"), vec![h, h]));
            spec.push((format!("{name}.b{gate}"), vec![h]));
        }
    }
    // Two-layer heads over the concatenated encoder states.
    fn mlp(spec: &mut Vec<(String, Vec<usize>)>, h: usize, name: &str, inp: usize, out: usize) {
        spec.push((format!("{name}.w1"), vec![h, inp]));
        spec.push((format!("{name}.b1"), vec![h]));
        spec.push((format!("{name}.w2"), vec![out, h]));
        spec.push((format!("{name}.b2"), vec![out]));
    }
    mlp(&mut spec, h, "prior_mean", 2 * h, cfg.latent);
    mlp(&mut spec, h, "prior_std", 2 * h, cfg.latent);
    mlp(&mut spec, h, "recog_mean", 2 * h, cfg.latent);
    mlp(&mut spec, h, "recog_std", 2 * h, cfg.latent);
    spec.push(("z_embed.w".into(), vec![h, cfg.latent]));
    spec.push(("z_embed.b".into(), vec![h]));
    mlp(&mut spec, h, "dec_init", 3 * h, h);
    mlp(&mut spec, h, "obs_mean", h, cfg.dim);
    mlp(&mut spec, h, "obs_std", h, cfg.dim);
    spec
}

impl Model {
    /// Fresh model with weights uniform in ±1/√fan_in and zero biases. Each
    /// parameter draws from its own named stream, so initialization does not
    /// depend on registration order.
    pub fn init(config: ModelConfig, rng: &StreamRng) -> Result<Self> {
        config.validate()?;
        let mut store = ParameterStore::new();
        for (name, shape) in parameter_spec(&config) {
            let tensor = if shape.len() == 2 {
                let bound = 1.0 / (shape[1] as f64).sqrt();
                let mut stream = rng.split(&name);
                let data = (0..shape[0] * shape[1])
                    .map(|_| stream.uniform_in(-bound, bound))
                    .collect();
                Tensor::new(shape, data)?
            } else {
                Tensor::zeros(&shape)
            };
            store.register(&name, tensor)?;
        }
        Ok(Model { config, store })
    }

    /// Rebuild from a config and a loaded store, checking names and shapes.
    pub fn from_parts(config: ModelConfig, store: ParameterStore) -> Result<Self> {
        config.validate()?;
        let spec = parameter_spec(&config);
        if store.len() != spec.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                spec.len(),
                store.len()
            )));
        }
        for (name, shape) in &spec {
            match store.value(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {name:?} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )));
                }
                None => {
                    return Err(Error::Checkpoint(format!("missing parameter {name:?}")));
                }
            }
        }
        Ok(Model { config, store })
    }

    pub(crate) fn binder<'t, 's>(&'s self, tape: &'t Tape) -> Binder<'t, 's> {
        Binder {
            tape,
            store: &self.store,
            cache: RefCell::new(HashMap::new()),
        }
    }
}

/// One training sample: a windowed series slice with its aligned events.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub window: TimeSeriesWindow,
    pub events: EventWindow,
}

/// Per-tape binding of named parameters to graph leaves. Caching keeps one
/// leaf per parameter per tape so gradients harvest once.
pub(crate) struct Binder<'t, 's> {
    pub(crate) tape: &'t Tape,
    store: &'s ParameterStore,
    cache: RefCell<HashMap<String, Var<'t>>>,
}

impl<'t> Binder<'t, '_> {
    pub(crate) fn var(&self, name: &str) -> Result<Var<'t>> {
        if let Some(v) = self.cache.borrow().get(name) {
            return Ok(*v);
        }
        let v = self.tape.param(self.store, name)?;
        self.cache.borrow_mut().insert(name.to_string(), v);
        Ok(v)
    }

    /// w·x + b
    pub(crate) fn affine(&self, prefix: &str, x: Var<'t>) -> Result<Var<'t>> {
        let w = self.var(&format!("{prefix}.w"))?;
        let b = self.var(&format!("{prefix}.b"))?;
        w.matmul(x)?.add(b)
    }

    /// tanh(w·x + b): the single-hidden-layer feature extractors.
    pub(crate) fn extractor(&self, prefix: &str, x: Var<'t>) -> Result<Var<'t>> {
        Ok(self.affine(prefix, x)?.tanh())
    }

    /// Two-layer head: w2·tanh(w1·x + b1) + b2.
    pub(crate) fn mlp(&self, prefix: &str, x: Var<'t>) -> Result<Var<'t>> {
        let w1 = self.var(&format!("{prefix}.w1"))?;
        let b1 = self.var(&format!("{prefix}.b1"))?;
        let w2 = self.var(&format!("{prefix}.w2"))?;
        let b2 = self.var(&format!("{prefix}.b2"))?;
        let hidden = w1.matmul(x)?.add(b1)?.tanh();
        w2.matmul(hidden)?.add(b2)
    }

    /// Gated recurrent update (two gates, tanh candidate).
    pub(crate) fn gru(&self, prefix: &str, input: Var<'t>, state: Var<'t>) -> Result<Var<'t>> {
        let gate = |g: &str, x: Var<'t>, h: Var<'t>| -> Result<Var<'t>> {
            let w = self.var(&format!("{prefix}.w{g}"))?;
            let u = self.var(&format!("{prefix}.u{g}"))?;
            let b = self.var(&format!("{prefix}.b{g}"))?;
            w.matmul(x)?.add(u.matmul(h)?)?.add(b)
        };
        let reset = gate("r", input, state)?.sigmoid();
        let update = gate("z", input, state)?.sigmoid();
        let candidate = gate("c", input, reset.mul(state)?)?.tanh();
        let keep = update.neg().add_scalar(1.0);
        keep.mul(state)?.add(update.mul(candidate)?)
    }
}
