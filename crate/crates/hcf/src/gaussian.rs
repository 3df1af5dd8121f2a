//! Diagonal Gaussian primitives: reparameterized sampling, analytic KL, and
//! the observation log-density, all differentiable through the tape.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Value-level diagonal Gaussian, parameterized by mean and log-variance.
#[derive(Clone, Debug)]
pub struct DiagGaussian {
    pub mean: Tensor,
    pub log_var: Tensor,
}

impl DiagGaussian {
    pub fn new(mean: Tensor, log_var: Tensor) -> Result<Self> {
        if mean.shape() != log_var.shape() || mean.rank() != 1 {
            return Err(Error::Data(format!(
                "diagonal Gaussian needs equal-length vectors, got {:?} and {:?}",
                mean.shape(),
                log_var.shape()
            )));
        }
        if !log_var.is_finite() || log_var.data().iter().any(|&lv| !lv.exp().is_finite()) {
            return Err(Error::Data("non-finite Gaussian variance".into()));
        }
        Ok(DiagGaussian { mean, log_var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_var
            .data()
            .iter()
            .map(|&lv| (0.5 * lv).exp())
            .collect()
    }

    /// Draw one sample, mean + std ⊙ ε.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let std = self.std();
        self.mean
            .data()
            .iter()
            .zip(&std)
            .map(|(&m, &s)| m + s * rng.standard_normal())
            .collect()
    }

    /// log N(x; mean, diag) summed over components.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.mean.data())
            .zip(self.log_var.data())
            .map(|((&xi, &mi), &lv)| {
                let d = xi - mi;
                -0.5 * (LN_2PI + lv + d * d / lv.exp())
            })
            .sum()
    }
}

/// Tape-level diagonal Gaussian whose parameters are graph nodes.
#[derive(Clone, Copy)]
pub struct GaussianVar<'t> {
    pub mean: Var<'t>,
    pub log_var: Var<'t>,
}

impl<'t> GaussianVar<'t> {
    pub fn dim(&self) -> usize {
        self.mean.shape()[0]
    }

    pub fn to_value(&self) -> Result<DiagGaussian> {
        DiagGaussian::new(self.mean.value(), self.log_var.value())
    }
}

/// mean + exp(½·log_var) ⊙ ε, differentiable in the Gaussian's parameters.
/// ε is a fixed noise vector of the same dimension.
pub fn reparameterize<'t>(tape: &'t Tape, q: &GaussianVar<'t>, eps: &Tensor) -> Result<Var<'t>> {
    if eps.rank() != 1 || eps.len() != q.dim() {
        return Err(Error::Data(format!(
            "noise length {} does not match Gaussian dimension {}",
            eps.len(),
            q.dim()
        )));
    }
    let std = q.log_var.scale(0.5).exp();
    let noise = tape.constant(eps.clone());
    q.mean.add(std.mul(noise)?)
}

/// Closed-form KL(q ‖ p) between diagonal Gaussians:
/// ½ Σ [ exp(lq − lp) + (μq − μp)²·exp(−lp) − 1 + lp − lq ].
pub fn diag_gaussian_kl<'t>(q: &GaussianVar<'t>, p: &GaussianVar<'t>) -> Result<Var<'t>> {
    if q.dim() != p.dim() {
        return Err(Error::Data(format!(
            "KL dimension mismatch: {} vs {}",
            q.dim(),
            p.dim()
        )));
    }
    let dlv = q.log_var.sub(p.log_var)?;
    let var_ratio = dlv.exp();
    let dmu = q.mean.sub(p.mean)?;
    let maha = dmu.mul(dmu)?.mul(p.log_var.neg().exp())?;
    let inner = var_ratio
        .add(maha)?
        .add(p.log_var.sub(q.log_var)?)?
        .add_scalar(-1.0);
    Ok(inner.sum().scale(0.5))
}

/// Sum of elementwise Gaussian log densities of `x` under N(mean, std²),
/// differentiable in mean and std. Errors if any std value is non-positive.
pub fn gaussian_log_pdf<'t>(x: &Tensor, mean: Var<'t>, std: Var<'t>) -> Result<Var<'t>> {
    if x.shape() != mean.shape() || x.shape() != std.shape() {
        return Err(Error::Data(format!(
            "gaussian_log_pdf shapes differ: x {:?}, mean {:?}, std {:?}",
            x.shape(),
            mean.shape(),
            std.shape()
        )));
    }
    if std.value().data().iter().any(|&s| s <= 0.0) {
        return Err(Error::Data("gaussian_log_pdf requires positive std".into()));
    }
    let n = x.len() as f64;
    let obs = {
        // constant leaf on the same tape as mean/std
        let t = tape_of(&mean);
        t.constant(x.clone())
    };
    let z = obs.sub(mean)?.div(std)?;
    let quad = z.mul(z)?.sum().scale(-0.5);
    let log_norm = std.log()?.sum().neg().add_scalar(-0.5 * n * LN_2PI);
    quad.add(log_norm)
}

// Var carries its tape reference; recover it for constant creation.
fn tape_of<'t>(v: &Var<'t>) -> &'t Tape {
    v.tape()
}
