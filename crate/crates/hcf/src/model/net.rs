//! Forward passes: the series and event encoders, the latent heads, and the
//! stochastic decoder.
//!
//! Both recurrent encoders start from a zero state. The series cell transits
//! once per sampling instant with input [φ(xₜ), ψ(tₜ)]; the event cell
//! transits once per event with input [ζ(one-hot), Δt, ψ(tₘ)] and then once
//! more at the window's past end with a zero type vector — the auxiliary
//! transition that tells the event encoder exactly where the window ends, so
//! overlapping windows sharing an event set still encode differently.

use crate::data::EventWindow;
use crate::data::TimeSeriesWindow;
use crate::error::{Error, Result};
use crate::gaussian::GaussianVar;
use crate::model::{Binder, Model};
use crate::tape::{concat, Tape, Var};
use crate::tensor::Tensor;

/// Which recurrent cell to step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RnnCell {
    Series,
    Events,
    Decoder,
}

impl RnnCell {
    fn prefix(self) -> &'static str {
        match self {
            RnnCell::Series => "ts_rnn",
            RnnCell::Events => "ev_rnn",
            RnnCell::Decoder => "dec_rnn",
        }
    }
}

/// Gaussian observation parameters as graph nodes; std is already floored.
#[derive(Clone, Copy)]
pub struct ObsVar<'t> {
    pub mean: Var<'t>,
    pub std: Var<'t>,
}

impl Model {
    /// One recurrent update of the chosen cell.
    pub fn rnn_cell_step<'t>(
        &self,
        tape: &'t Tape,
        cell: RnnCell,
        input: Var<'t>,
        state: Var<'t>,
    ) -> Result<Var<'t>> {
        self.binder(tape).gru(cell.prefix(), input, state)
    }

    /// Run the series encoder over the past range and return the state at the
    /// past end; with `include_future`, keep transiting over the ground-truth
    /// future (the recognition path) and also return the state at T+τ. Both
    /// paths share every parameter and the first T transitions.
    pub fn encode_series<'t>(
        &self,
        tape: &'t Tape,
        window: &TimeSeriesWindow,
        include_future: bool,
    ) -> Result<(Var<'t>, Option<Var<'t>>)> {
        if window.dim != self.config.dim {
            return Err(Error::Data(format!(
                "window has {} variables, model expects {}",
                window.dim, self.config.dim
            )));
        }
        let binder = self.binder(tape);
        let mut h = tape.constant(Tensor::zeros(&[self.config.hidden]));
        for t in 0..window.t_past {
            h = self.series_step(&binder, window.past_row(t), &window.features[t], h)?;
        }
        let h_end = h;
        let h_future = if include_future {
            let future = window.future.as_ref().ok_or_else(|| {
                Error::Data("recognition encoding needs the future segment".into())
            })?;
            let d = window.dim;
            for j in 0..window.horizon {
                let row = &future[j * d..(j + 1) * d];
                h = self.series_step(&binder, row, &window.features[window.t_past + j], h)?;
            }
            Some(h)
        } else {
            None
        };
        Ok((h_end, h_future))
    }

    fn series_step<'t>(
        &self,
        binder: &Binder<'t, '_>,
        values: &[f64],
        features: &[f64; 4],
        state: Var<'t>,
    ) -> Result<Var<'t>> {
        let x = binder.tape.constant(Tensor::vector(values.to_vec()));
        let f = binder.tape.constant(Tensor::vector(features.to_vec()));
        let input = concat(
            binder.tape,
            &[binder.extractor("phi", x)?, binder.extractor("psi", f)?],
        )?;
        binder.gru("ts_rnn", input, state)
    }

    /// Event encoder: one transit per real event (padding never transits),
    /// then the auxiliary end-marker transit.
    pub fn encode_events<'t>(&self, tape: &'t Tape, events: &EventWindow) -> Result<Var<'t>> {
        self.encode_events_with_marker(tape, events, true)
    }

    /// Diagnostic variant: with `use_end_marker = false` the auxiliary
    /// transit is skipped, which collapses windows that share an event set.
    pub fn encode_events_with_marker<'t>(
        &self,
        tape: &'t Tape,
        events: &EventWindow,
        use_end_marker: bool,
    ) -> Result<Var<'t>> {
        let c = self.config.num_event_types;
        if events.num_types > c {
            return Err(Error::Data(format!(
                "event window has {} types, model expects at most {c}",
                events.num_types
            )));
        }
        let binder = self.binder(tape);
        let mut h = tape.constant(Tensor::zeros(&[self.config.hidden]));
        for i in 0..events.len() {
            let mut one_hot = vec![0.0; c];
            one_hot[events.type_ids[i] - 1] = 1.0;
            h = self.event_step(&binder, one_hot, events.deltas[i], &events.features[i], h)?;
        }
        if use_end_marker {
            h = self.event_step(
                &binder,
                vec![0.0; c],
                events.end_delta,
                &events.end_features,
                h,
            )?;
        }
        Ok(h)
    }

    fn event_step<'t>(
        &self,
        binder: &Binder<'t, '_>,
        type_vec: Vec<f64>,
        delta: f64,
        features: &[f64; 4],
        state: Var<'t>,
    ) -> Result<Var<'t>> {
        let e = binder.tape.constant(Tensor::vector(type_vec));
        let dt = binder.tape.constant(Tensor::vector(vec![delta]));
        let f = binder.tape.constant(Tensor::vector(features.to_vec()));
        let input = concat(
            binder.tape,
            &[
                binder.extractor("zeta", e)?,
                dt,
                binder.extractor("psi", f)?,
            ],
        )?;
        binder.gru("ev_rnn", input, state)
    }

    /// Latent prior from the past-only encoder states.
    pub fn prior<'t>(
        &self,
        tape: &'t Tape,
        h_series: Var<'t>,
        h_events: Var<'t>,
    ) -> Result<GaussianVar<'t>> {
        self.gaussian_head(tape, "prior_mean", "prior_std", h_series, h_events)
    }

    /// Recognition posterior from the future-aware series state; only used
    /// in training.
    pub fn recognition<'t>(
        &self,
        tape: &'t Tape,
        h_series_future: Var<'t>,
        h_events: Var<'t>,
    ) -> Result<GaussianVar<'t>> {
        self.gaussian_head(tape, "recog_mean", "recog_std", h_series_future, h_events)
    }

    fn gaussian_head<'t>(
        &self,
        tape: &'t Tape,
        mean_prefix: &str,
        std_prefix: &str,
        h_series: Var<'t>,
        h_events: Var<'t>,
    ) -> Result<GaussianVar<'t>> {
        let binder = self.binder(tape);
        let joint = concat(tape, &[h_series, h_events])?;
        let mean = binder.mlp(mean_prefix, joint)?;
        let std = binder
            .mlp(std_prefix, joint)?
            .softplus()
            .add_scalar(self.config.std_floor);
        let log_var = std.log()?.scale(2.0);
        Ok(GaussianVar { mean, log_var })
    }

    /// Decoder initial state from the encoder states and a latent draw.
    pub fn decoder_init<'t>(
        &self,
        tape: &'t Tape,
        h_series: Var<'t>,
        h_events: Var<'t>,
        z: Var<'t>,
    ) -> Result<Var<'t>> {
        if z.shape() != [self.config.latent] {
            return Err(Error::Data(format!(
                "latent draw has shape {:?}, expected [{}]",
                z.shape(),
                self.config.latent
            )));
        }
        let binder = self.binder(tape);
        let embedded = binder.extractor("z_embed", z)?;
        let joint = concat(tape, &[h_series, h_events, embedded])?;
        binder.mlp("dec_init", joint)
    }

    /// One decoder transition: feed the previous observation and the current
    /// instant's features, return the new state and the observation Gaussian.
    pub fn decoder_step<'t>(
        &self,
        tape: &'t Tape,
        prev: Var<'t>,
        features: &[f64; 4],
        state: Var<'t>,
    ) -> Result<(Var<'t>, ObsVar<'t>)> {
        let binder = self.binder(tape);
        let f = tape.constant(Tensor::vector(features.to_vec()));
        let input = concat(
            tape,
            &[binder.extractor("phi", prev)?, binder.extractor("psi", f)?],
        )?;
        let h = binder.gru("dec_rnn", input, state)?;
        let mean = binder.mlp("obs_mean", h)?;
        let std = binder
            .mlp("obs_std", h)?
            .softplus()
            .add_scalar(self.config.std_floor);
        Ok((h, ObsVar { mean, std }))
    }
}
