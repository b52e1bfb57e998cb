/// Central finite-difference gradient of `f` at `theta`.
pub fn numeric_gradient(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut th = theta.to_vec();
    (0..th.len())
        .map(|i| {
            let orig = th[i];
            th[i] = orig + h;
            let up = f(&th);
            th[i] = orig - h;
            let down = f(&th);
            th[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Denominator floor for near-zero coordinates.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// Worst coordinate-wise relative error `|a-n| / max(|a|, |n|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR))
        .fold(0.0, f64::max)
}
