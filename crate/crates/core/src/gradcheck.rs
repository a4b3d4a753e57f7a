//! Central-difference gradient oracle.

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::{ParamId, ParamStore};

/// Compare autodiff gradients of `f` against central differences
/// `(f(p + eps) - f(p - eps)) / (2 eps)` for every element of every tensor
/// in `params`. Returns the worst relative error, with denominator
/// `max(|g|, 1e-8)` where `g` is the autodiff gradient.
///
/// `f` rebuilds the scalar on a fresh tape each call. The store is restored
/// to its original values before returning.
pub fn finite_diff_check<F>(store: &mut ParamStore, params: &[ParamId], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    assert!(eps > 0.0, "eps must be positive");
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        let grads = tape.backward(loss)?;
        params
            .iter()
            .map(|&id| {
                grads
                    .param(id)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; store.get(id).len()])
            })
            .collect()
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        Ok(tape.scalar_value(loss))
    };

    let mut worst = 0.0_f64;
    for (&id, grad) in params.iter().zip(&analytic) {
        for (i, &g) in grad.iter().enumerate() {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(store);
            store.get_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(store);
            store.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let rel = (numeric - g).abs() / g.abs().max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
