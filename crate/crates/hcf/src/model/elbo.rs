//! The stochastic variational objective.
//!
//! elbo = −KL(q ‖ p) + (1/K) Σₖ log p(future | past, Z⁽ᵏ⁾), with the KL term
//! computed in closed form between the recognition and prior Gaussians and
//! the likelihood term evaluated by teacher-forced decoding of K
//! reparameterized latent draws. The returned scalar is to be maximized.

use crate::error::{Error, Result};
use crate::gaussian::{diag_gaussian_kl, gaussian_log_pdf, reparameterize};
use crate::model::{Model, TrainingSample};
use crate::rng::StreamRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Build the objective for one training sample with fixed latent noise
/// (`eps` holds K vectors of the latent dimension). Deterministic given the
/// noise, which is what the gradient checks rely on.
pub fn elbo<'t>(
    tape: &'t Tape,
    model: &Model,
    sample: &TrainingSample,
    eps: &[Tensor],
) -> Result<Var<'t>> {
    if eps.is_empty() {
        return Err(Error::Data(
            "objective needs at least one latent sample".into(),
        ));
    }
    let window = &sample.window;
    let future = window
        .future
        .as_ref()
        .ok_or_else(|| Error::Data("training sample is missing its future segment".into()))?;

    let (h_past, h_full) = model.encode_series(tape, window, true)?;
    let h_full = h_full.expect("include_future returns the extended state");
    let h_events = model.encode_events(tape, &sample.events)?;

    let prior = model.prior(tape, h_past, h_events)?;
    let recognition = model.recognition(tape, h_full, h_events)?;
    let kl = diag_gaussian_kl(&recognition, &prior)?;

    let d = window.dim;
    let mut likelihoods: Option<Var<'t>> = None;
    for noise in eps {
        let z = reparameterize(tape, &recognition, noise)?;
        let mut state = model.decoder_init(tape, h_past, h_events, z)?;
        let mut prev = tape.constant(Tensor::vector(window.last_past_row().to_vec()));
        let mut ll: Option<Var<'t>> = None;
        for j in 0..window.horizon {
            let (next, obs) =
                model.decoder_step(tape, prev, &window.features[window.t_past + j], state)?;
            state = next;
            let truth = Tensor::vector(future[j * d..(j + 1) * d].to_vec());
            let step_ll = gaussian_log_pdf(&truth, obs.mean, obs.std)?;
            ll = Some(match ll {
                Some(acc) => acc.add(step_ll)?,
                None => step_ll,
            });
            // Teacher forcing: the decoder sees ground truth, not its sample.
            prev = tape.constant(truth);
        }
        let ll = ll.expect("horizon is positive");
        likelihoods = Some(match likelihoods {
            Some(acc) => acc.add(ll)?,
            None => ll,
        });
    }
    let avg_ll = likelihoods.unwrap().scale(1.0 / eps.len() as f64);
    avg_ll.sub(kl)
}

/// Draw K latent noise vectors from `rng` and build the objective.
pub fn elbo_with_rng<'t>(
    tape: &'t Tape,
    model: &Model,
    sample: &TrainingSample,
    rng: &mut StreamRng,
) -> Result<Var<'t>> {
    let k = model.config.elbo_samples;
    if k == 0 {
        return Err(Error::Data(
            "objective needs at least one latent sample".into(),
        ));
    }
    let eps: Vec<Tensor> = (0..k)
        .map(|_| Tensor::vector(rng.normal_vec(model.config.latent)))
        .collect();
    elbo(tape, model, sample, &eps)
}
