//! Central finite-difference gradient estimation, used by the test suites
//! as an oracle that is independent of the tape's analytic backward rules.

use ndarray::ArrayD;

/// Estimate d f / d inputs\[k\] elementwise by central differences.
///
/// `f` must be a pure function of the inputs; it is re-evaluated 2·N times
/// where N is the total element count of `inputs[k]`.
pub fn central_difference<Func>(f: Func, inputs: &[ArrayD<f64>], k: usize, h: f64) -> ArrayD<f64>
where
    Func: Fn(&[ArrayD<f64>]) -> f64,
{
    let mut grad = ArrayD::zeros(inputs[k].raw_dim());
    let mut work: Vec<ArrayD<f64>> = inputs.to_vec();
    let flat_len = inputs[k].len();
    for idx in 0..flat_len {
        let orig = work[k].as_slice_mut().expect("standard layout")[idx];
        work[k].as_slice_mut().unwrap()[idx] = orig + h;
        let fp = f(&work);
        work[k].as_slice_mut().unwrap()[idx] = orig - h;
        let fm = f(&work);
        work[k].as_slice_mut().unwrap()[idx] = orig;
        grad.as_slice_mut().unwrap()[idx] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Relative error between an analytic gradient and its finite-difference
/// estimate: max over elements of |a - e| / max(1, |a|, |e|).
pub fn relative_error(analytic: &ArrayD<f64>, estimate: &ArrayD<f64>) -> f64 {
    assert_eq!(analytic.shape(), estimate.shape());
    let mut worst = 0.0f64;
    for (a, e) in analytic.iter().zip(estimate.iter()) {
        let denom = 1.0f64.max(a.abs()).max(e.abs());
        worst = worst.max((a - e).abs() / denom);
    }
    worst
}
