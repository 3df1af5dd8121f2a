//! Run configuration: defaults mirroring the reference setup, flat key-value
//! config files, the `HCF_SEED` environment override, and provenance hashes
//! for output headers. Precedence: defaults < config file < environment <
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forecast::default_levels;
use crate::model::ModelConfig;

pub const SEED_ENV_VAR: &str = "HCF_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    // model
    pub hidden: usize,
    pub latent: usize,
    pub elbo_samples: usize,
    pub t_past: usize,
    pub horizon: usize,
    pub std_floor: f64,
    // training
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps_per_epoch: Option<usize>,
    /// Points held out from the end of the series for evaluation.
    pub holdout: usize,
    pub seed: u64,
    // forecast
    pub num_samples: usize,
    pub quantiles: Vec<f64>,
    /// Rolling-origin stride; defaults to the horizon (non-overlapping).
    pub stride: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hidden: 100,
            latent: 50,
            elbo_samples: 5,
            t_past: 168,
            horizon: 24,
            std_floor: 1e-4,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.001,
            steps_per_epoch: None,
            holdout: 672, // four weeks of hourly points
            seed: 1,
            num_samples: 1000,
            quantiles: default_levels(),
            stride: None,
        }
    }
}

pub fn parse_levels(raw: &str) -> Result<Vec<f64>> {
    let levels: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad quantile list {raw:?}")))?;
    if levels.iter().any(|p| !(0.0 < *p && *p < 1.0)) {
        return Err(Error::Config("quantile levels must lie in (0,1)".into()));
    }
    Ok(levels)
}

/// Parse a flat `key=value` file; `#` lines are comments.
pub fn parse_key_value_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Load {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Overlay keys from a config file onto `self`.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let map = parse_key_value_file(path)?;
        for (k, v) in &map {
            let bad = |what: &str| Error::Config(format!("config key {k}: {what} ({v:?})"));
            match k.as_str() {
                "hidden" => self.hidden = v.parse().map_err(|_| bad("expected integer"))?,
                "latent" => self.latent = v.parse().map_err(|_| bad("expected integer"))?,
                "elbo_samples" => {
                    self.elbo_samples = v.parse().map_err(|_| bad("expected integer"))?
                }
                "t_past" => self.t_past = v.parse().map_err(|_| bad("expected integer"))?,
                "horizon" => self.horizon = v.parse().map_err(|_| bad("expected integer"))?,
                "std_floor" => self.std_floor = v.parse().map_err(|_| bad("expected number"))?,
                "epochs" => self.epochs = v.parse().map_err(|_| bad("expected integer"))?,
                "batch_size" => self.batch_size = v.parse().map_err(|_| bad("expected integer"))?,
                "learning_rate" => {
                    self.learning_rate = v.parse().map_err(|_| bad("expected number"))?
                }
                "steps_per_epoch" => {
                    self.steps_per_epoch = Some(v.parse().map_err(|_| bad("expected integer"))?)
                }
                "holdout" => self.holdout = v.parse().map_err(|_| bad("expected integer"))?,
                "seed" => self.seed = v.parse().map_err(|_| bad("expected integer"))?,
                "num_samples" => {
                    self.num_samples = v.parse().map_err(|_| bad("expected integer"))?
                }
                "quantiles" => self.quantiles = parse_levels(v)?,
                "stride" => self.stride = Some(v.parse().map_err(|_| bad("expected integer"))?),
                _ => return Err(Error::Config(format!("unknown config key {k:?}"))),
            }
        }
        Ok(())
    }

    /// `HCF_SEED` overrides whatever the config said.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            self.seed = raw.parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV_VAR} must be an integer, got {raw:?}"))
            })?;
        }
        Ok(())
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = vec![
            ("hidden".into(), self.hidden.to_string()),
            ("latent".into(), self.latent.to_string()),
            ("elbo_samples".into(), self.elbo_samples.to_string()),
            ("t_past".into(), self.t_past.to_string()),
            ("horizon".into(), self.horizon.to_string()),
            ("std_floor".into(), format!("{}", self.std_floor)),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("learning_rate".into(), format!("{}", self.learning_rate)),
            ("holdout".into(), self.holdout.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("num_samples".into(), self.num_samples.to_string()),
            (
                "quantiles".into(),
                self.quantiles
                    .iter()
                    .map(|p| format!("{p}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        ];
        if let Some(s) = self.steps_per_epoch {
            kv.push(("steps_per_epoch".into(), s.to_string()));
        }
        if let Some(s) = self.stride {
            kv.push(("stride".into(), s.to_string()));
        }
        kv
    }

    /// Short provenance hash of the effective configuration.
    pub fn hash(&self) -> String {
        config_hash(&self.key_values())
    }

    pub fn model_config(&self, dim: usize, num_event_types: usize) -> ModelConfig {
        ModelConfig {
            dim,
            num_event_types,
            hidden: self.hidden,
            latent: self.latent,
            elbo_samples: self.elbo_samples,
            t_past: self.t_past,
            horizon: self.horizon,
            std_floor: self.std_floor,
        }
    }
}

/// Stable 16-hex-digit hash of sorted key-value pairs.
pub fn config_hash(pairs: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = pairs.iter().collect();
    sorted.sort();
    let mut h = Sha256::new();
    for (k, v) in sorted {
        h.update(k.as_bytes());
        h.update(*b"=");
        h.update(v.as_bytes());
        h.update(*b"\n");
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_reference_settings() {
        let c = RunConfig::default();
        assert_eq!(c.hidden, 100);
        assert_eq!(c.latent, 50);
        assert_eq!(c.elbo_samples, 5);
        assert_eq!(c.t_past, 168);
        assert_eq!(c.horizon, 24);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.num_samples, 1000);
        assert_eq!(c.holdout, 672);
    }

    #[test]
    fn file_overrides_defaults_and_hash_tracks_changes() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nhidden=8\nquantiles=0.1,0.9\nseed=7").unwrap();
        let mut c = RunConfig::default();
        let h0 = c.hash();
        c.merge_file(f.path()).unwrap();
        assert_eq!(c.hidden, 8);
        assert_eq!(c.quantiles, vec![0.1, 0.9]);
        assert_eq!(c.seed, 7);
        assert_ne!(c.hash(), h0);
        assert_eq!(c.hash(), c.clone().hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "hideen=8").unwrap();
        let mut c = RunConfig::default();
        assert!(c.merge_file(f.path()).is_err());
    }

    #[test]
    fn bad_levels_rejected() {
        assert!(parse_levels("0.5,1.5").is_err());
        assert!(parse_levels("0.5,abc").is_err());
        assert_eq!(parse_levels("0.25, 0.75").unwrap(), vec![0.25, 0.75]);
    }
}
