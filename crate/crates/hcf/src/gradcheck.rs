//! Finite-difference gradient verification harness.
//!
//! Compares tape gradients of a scalar loss against central differences over
//! every scalar parameter in a store. The loss builder must be deterministic
//! for a fixed seed; the harness evaluates it twice at the base point and
//! rejects non-reproducible losses.

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tape::{Tape, Var};

/// Per-parameter worst relative error between analytic and numeric gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_param: Vec<(String, f64)>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Check analytic gradients of `loss` against central differences with the
/// given `step`. Relative error uses max(|analytic|, |numeric|, 1e-5) as the
/// denominator: components below 1e-5 compare absolutely at that scale,
/// which keeps the comparison above the roundoff noise a central difference
/// carries (≈ ε·|loss| / step).
pub fn finite_diff_check<F>(
    store: &mut ParameterStore,
    step: f64,
    loss: F,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &ParameterStore) -> Result<Var<'t>>,
{
    let base = {
        let tape = Tape::new();
        loss(&tape, store)?.item()
    };
    let again = {
        let tape = Tape::new();
        loss(&tape, store)?.item()
    };
    if base.to_bits() != again.to_bits() {
        return Err(Error::NondeterministicLoss(base, again));
    }

    store.zero_grads();
    {
        let tape = Tape::new();
        let root = loss(&tape, store)?;
        tape.backward(root, store)?;
    }
    let analytic: Vec<(String, Vec<f64>)> = store
        .names()
        .map(|n| (n.to_string(), store.grad(n).unwrap().data().to_vec()))
        .collect();
    store.zero_grads();

    let mut per_param = Vec::with_capacity(analytic.len());
    let mut max_rel = 0.0f64;
    for (name, grad) in &analytic {
        let mut worst = 0.0f64;
        for (idx, &an) in grad.iter().enumerate() {
            store.perturb(name, idx, step)?;
            let plus = {
                let tape = Tape::new();
                loss(&tape, store)?.item()
            };
            store.perturb(name, idx, -2.0 * step)?;
            let minus = {
                let tape = Tape::new();
                loss(&tape, store)?.item()
            };
            store.perturb(name, idx, step)?;
            let numeric = (plus - minus) / (2.0 * step);
            let denom = an.abs().max(numeric.abs()).max(1e-5);
            worst = worst.max(((an - numeric) / denom).abs());
        }
        max_rel = max_rel.max(worst);
        per_param.push((name.clone(), worst));
    }

    Ok(GradCheckReport {
        per_param,
        max_rel_err: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_loss_gradient_is_exact() {
        let mut store = ParameterStore::new();
        store.register("p", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let report = finite_diff_check(&mut store, 1e-5, |tape, s| {
            let p = tape.param(s, "p")?;
            Ok(p.mul(p)?.sum())
        })
        .unwrap();
        // analytic gradient (2, 4); central differences are exact for quadratics
        assert!(report.max_rel_err < 1e-8, "{report:?}");
        store.zero_grads();
        let tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let root = p.mul(p).unwrap().sum();
        tape.backward(root, &mut store).unwrap();
        let g = store.grad("p").unwrap().data();
        assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_loss_has_zero_gradients_both_ways() {
        let mut store = ParameterStore::new();
        store.register("p", Tensor::vector(vec![0.7])).unwrap();
        let report = finite_diff_check(&mut store, 1e-5, |tape, s| {
            // loss touches p but is constant in it: p·0 + 3
            let p = tape.param(s, "p")?;
            Ok(p.scale(0.0).sum().add_scalar(3.0))
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-9, "{report:?}");
    }

    #[test]
    fn nondeterministic_loss_is_rejected() {
        use std::cell::Cell;
        let counter = Cell::new(0.0f64);
        let mut store = ParameterStore::new();
        store.register("p", Tensor::vector(vec![0.0])).unwrap();
        let err = finite_diff_check(&mut store, 1e-5, |tape, s| {
            counter.set(counter.get() + 1.0);
            let p = tape.param(s, "p")?;
            Ok(p.sum().add_scalar(counter.get()))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NondeterministicLoss(_, _)));
    }
}
