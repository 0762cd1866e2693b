//! Central finite-difference gradient oracle.
//!
//! `backward` implementations are checked by perturbing every scalar
//! parameter by `±epsilon`, recomputing the loss, and comparing the numeric
//! slope against the analytic gradient stored in each [`Parameter`].

use super::tensor::Parameter;

/// Below this magnitude both gradients are treated as zero and skipped,
/// avoiding 0/0 noise.
const DENOM_FLOOR: f64 = 1e-10;

/// Worst relative error between the analytic gradients already stored in the
/// model's parameters and central finite differences of `loss_of`.
///
/// `params_of` must return the parameters in a stable order; `loss_of` must be
/// deterministic. Parameter values are restored before returning.
pub fn finite_difference_check<M>(
    model: &mut M,
    mut params_of: impl FnMut(&mut M) -> Vec<&mut Parameter>,
    mut loss_of: impl FnMut(&mut M) -> f64,
    epsilon: f64,
) -> f64 {
    let param_lens: Vec<usize> = params_of(model).iter().map(|p| p.value.len()).collect();
    let mut worst = 0.0_f64;

    for (pi, &len) in param_lens.iter().enumerate() {
        for j in 0..len {
            let analytic = params_of(model)[pi].grad.values()[j];

            params_of(model)[pi].value.values_mut()[j] += epsilon;
            let loss_plus = loss_of(model);
            params_of(model)[pi].value.values_mut()[j] -= 2.0 * epsilon;
            let loss_minus = loss_of(model);
            params_of(model)[pi].value.values_mut()[j] += epsilon;

            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let denom = analytic.abs().max(numeric.abs());
            if denom > DENOM_FLOOR {
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
    }
    worst
}
