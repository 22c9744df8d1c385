//! Central finite-difference check of the full model gradient.

use super::network::{Model, SceneInput};
use super::{LossConfig, ModelError};

/// Denominator floor for the relative error. Parameters whose analytic gradient is
/// exactly zero (a bias feeding a normalization) show pure roundoff in the difference quotient.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter and element with the largest relative error.
    pub worst: String,
    pub checked: usize,
}

/// `|a − b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient with `(L(θ+ε) − L(θ−ε)) / 2ε` for every scalar parameter.
pub fn gradient_check(model: &mut Model, input: &SceneInput, loss: &LossConfig, eps: f64) -> Result<GradCheck, ModelError> {
    let (_, grads) = model.loss_and_grad(input, loss)?;
    let mut out = GradCheck { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    for p in 0..model.params.values.len() {
        for i in 0..model.params.values[p].data.len() {
            let orig = model.params.values[p].data[i];
            model.params.values[p].data[i] = orig + eps;
            let up = model.loss(input, loss)?.total;
            model.params.values[p].data[i] = orig - eps;
            let dn = model.loss(input, loss)?.total;
            model.params.values[p].data[i] = orig;
            let fd = (up - dn) / (2.0 * eps);
            let a = grads.tensors[p].data[i];
            let rel = relative_error(a, fd);
            out.checked += 1;
            if rel > out.max_rel_error || out.worst.is_empty() {
                out.max_rel_error = out.max_rel_error.max(rel);
                out.worst = format!("{}[{i}]: analytic {a:e}, numeric {fd:e}", model.params.names[p]);
            }
        }
    }
    Ok(out)
}
