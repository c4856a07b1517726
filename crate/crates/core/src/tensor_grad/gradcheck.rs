//! Central finite-difference gradient checks.

use super::{ParamSet, Tensor};

/// `|a − b| / max(|a|, |b|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference gradient of a scalar function of one tensor.
pub fn numeric_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor, eps: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// Worst relative error between two gradient tensors of equal shape.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Compares the gradients stored in `params` against central differences of
/// `f` and returns the worst relative error over every scalar parameter.
pub fn finite_diff_check(f: impl Fn(&ParamSet) -> f64, params: &ParamSet, eps: f64) -> f64 {
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    let mut worst = 0.0f64;
    for name in &names {
        let analytic = params.get(name).expect("name from same set").grad.clone();
        for i in 0..analytic.len() {
            let orig = probe.get(name).unwrap().value.data()[i];
            probe.get_mut(name).unwrap().value.data_mut()[i] = orig + eps;
            let plus = f(&probe);
            probe.get_mut(name).unwrap().value.data_mut()[i] = orig - eps;
            let minus = f(&probe);
            probe.get_mut(name).unwrap().value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    worst
}
