//! Per-variable standardization fitted on the training range only.

use crate::data::RawSeries;
use crate::error::{Error, Result};

/// Per-variable mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    /// Fit on rows `[0, train_len)` of the series. Rejects constant
    /// variables, whose standardization would be undefined.
    pub fn fit(series: &RawSeries, train_len: usize) -> Result<Self> {
        if train_len == 0 || train_len > series.len() {
            return Err(Error::Data(format!(
                "training range of {train_len} rows invalid for series of length {}",
                series.len()
            )));
        }
        let d = series.dim();
        let n = train_len as f64;
        let mut means = vec![0.0; d];
        for t in 0..train_len {
            for (j, m) in means.iter_mut().enumerate() {
                *m += series.value(t, j);
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for t in 0..train_len {
            for (j, s) in stds.iter_mut().enumerate() {
                let dv = series.value(t, j) - means[j];
                *s += dv * dv;
            }
        }
        for (j, s) in stds.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                return Err(Error::Data(format!(
                    "variable {:?} is constant over the training range",
                    series.variable_names[j]
                )));
            }
        }
        Ok(Scaler { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply_value(&self, d: usize, v: f64) -> f64 {
        (v - self.means[d]) / self.stds[d]
    }

    pub fn invert_value(&self, d: usize, v: f64) -> f64 {
        v * self.stds[d] + self.means[d]
    }

    /// Standardize a row-major T×D buffer in place.
    pub fn apply_rows(&self, values: &mut [f64]) {
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            *v = (*v - self.means[i % d]) / self.stds[i % d];
        }
    }

    pub fn invert_rows(&self, values: &mut [f64]) {
        let d = self.dim();
        for (i, v) in values.iter_mut().enumerate() {
            *v = *v * self.stds[i % d] + self.means[i % d];
        }
    }
}
