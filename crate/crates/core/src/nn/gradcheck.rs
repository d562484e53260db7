use super::loss::Loss;
use super::model::MlpModel;
use crate::error::{invalid, Result};
use crate::tensor::Tensor2;

/// Relative discrepancy used by every gradient check in the crate.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Largest relative error between backprop and central differences over all
/// parameters, for the batch-mean `loss` on `(inputs, targets)`.
pub fn grad_check(model: &MlpModel, inputs: &Tensor2, targets: &Tensor2, loss: Loss, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return invalid(format!("epsilon must lie in (0, 1e-3], got {epsilon}"));
    }
    let pass = model.forward(inputs, None)?;
    let analytic = model.backward(&pass, targets, loss)?.flat();
    let base = model.flat_params();
    let mut probe = model.clone();
    let eval = |m: &MlpModel| -> Result<f64> { loss.value(&m.predict(inputs)?, targets) };
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        *probe.param_mut(k) = base[k] + epsilon;
        let up = eval(&probe)?;
        *probe.param_mut(k) = base[k] - epsilon;
        let down = eval(&probe)?;
        *probe.param_mut(k) = base[k];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[k], numeric));
    }
    Ok(worst)
}
