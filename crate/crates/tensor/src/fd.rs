use crate::error::TensorError;
use crate::tensor::Tensor;

/// Central-difference gradient of a scalar function:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every element `i`.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&Tensor) -> f64,
    x: &Tensor,
    h: f64,
) -> Result<Tensor, TensorError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(TensorError::contract("finite_difference_gradient", format!("bad step {h}")));
    }
    let mut probe = x.clone().into_data();
    let mut grad = Vec::with_capacity(probe.len());
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&Tensor::from_parts(x.shape().to_vec(), probe.clone()));
        probe[i] = orig - h;
        let minus = f(&Tensor::from_parts(x.shape().to_vec(), probe.clone()));
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(TensorError::contract(
                "finite_difference_gradient",
                format!("non-finite function value at element {i}"),
            ));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Tensor::new(x.shape().to_vec(), grad)
}

/// Largest element-wise `|a - b| / max(|a|, floor)`, with `a` the analytic gradient.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "relative error shape mismatch");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(floor))
        .fold(0.0, f64::max)
}
