//! Self-sufficient checkpoint bundle: the parameter container plus a flat
//! key-value sidecar (`<path>.meta`) holding the model config, the fitted
//! scaler, the temporal-feature anchor, and the variable/event-type names —
//! everything forecasting needs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{FeatureAnchor, Scaler};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::params::ParameterStore;

const SIDECAR_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub model: Model,
    pub scaler: Scaler,
    pub anchor: FeatureAnchor,
    pub step_seconds: i64,
    pub variable_names: Vec<String>,
    pub event_type_names: Vec<String>,
    /// Epochs completed so far; resumed training continues from here.
    pub epochs_trained: usize,
}

fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

impl ModelBundle {
    /// Write the parameter container (with Adam state, so training can
    /// resume bit-identically) and the sidecar.
    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        self.model.store.save(checkpoint, true)?;
        let c = &self.model.config;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        kv("format_version", SIDECAR_VERSION.to_string());
        kv("dim", c.dim.to_string());
        kv("num_event_types", c.num_event_types.to_string());
        kv("hidden", c.hidden.to_string());
        kv("latent", c.latent.to_string());
        kv("elbo_samples", c.elbo_samples.to_string());
        kv("t_past", c.t_past.to_string());
        kv("horizon", c.horizon.to_string());
        kv("std_floor", format!("{}", c.std_floor));
        kv("anchor_start", self.anchor.start_epoch.to_string());
        kv("anchor_span", self.anchor.span_seconds.to_string());
        kv("step_seconds", self.step_seconds.to_string());
        kv("epochs_trained", self.epochs_trained.to_string());
        kv("variables", self.variable_names.join(","));
        kv("event_types", self.event_type_names.join(","));
        for (i, (m, s)) in self.scaler.means.iter().zip(&self.scaler.stds).enumerate() {
            kv(&format!("scaler_mean.{i}"), format!("{m}"));
            kv(&format!("scaler_std.{i}"), format!("{s}"));
        }
        fs::write(sidecar_path(checkpoint), out)?;
        Ok(())
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let side = sidecar_path(checkpoint);
        let text = fs::read_to_string(&side).map_err(|e| {
            Error::Checkpoint(format!("cannot read sidecar {}: {e}", side.display()))
        })?;
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad sidecar line {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k)
                .ok_or_else(|| Error::Checkpoint(format!("sidecar missing key {k:?}")))
        };
        let parse = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("sidecar key {k:?} is not a number")))
        };
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("sidecar key {k:?} is not an integer")))
        };
        let parse_i64 = |k: &str| -> Result<i64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("sidecar key {k:?} is not an integer")))
        };
        let version = parse_usize("format_version")?;
        if version != SIDECAR_VERSION as usize {
            return Err(Error::Checkpoint(format!(
                "unsupported sidecar version {version}"
            )));
        }
        let config = ModelConfig {
            dim: parse_usize("dim")?,
            num_event_types: parse_usize("num_event_types")?,
            hidden: parse_usize("hidden")?,
            latent: parse_usize("latent")?,
            elbo_samples: parse_usize("elbo_samples")?,
            t_past: parse_usize("t_past")?,
            horizon: parse_usize("horizon")?,
            std_floor: parse("std_floor")?,
        };
        let split_names = |k: &str| -> Result<Vec<String>> {
            let raw = get(k)?;
            Ok(if raw.is_empty() {
                Vec::new()
            } else {
                raw.split(',').map(str::to_string).collect()
            })
        };
        let variable_names = split_names("variables")?;
        let event_type_names = split_names("event_types")?;
        if variable_names.len() != config.dim {
            return Err(Error::Checkpoint("variable list does not match dim".into()));
        }
        let mut means = Vec::with_capacity(config.dim);
        let mut stds = Vec::with_capacity(config.dim);
        for i in 0..config.dim {
            means.push(parse(&format!("scaler_mean.{i}"))?);
            stds.push(parse(&format!("scaler_std.{i}"))?);
        }
        let store = ParameterStore::load(checkpoint)?;
        Ok(ModelBundle {
            model: Model::from_parts(config, store)?,
            scaler: Scaler { means, stds },
            anchor: FeatureAnchor {
                start_epoch: parse_i64("anchor_start")?,
                span_seconds: parse_i64("anchor_span")?,
            },
            step_seconds: parse_i64("step_seconds")?,
            variable_names,
            event_type_names,
            epochs_trained: parse_usize("epochs_trained")?,
        })
    }
}
