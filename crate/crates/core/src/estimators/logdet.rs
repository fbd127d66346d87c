use num_complex::Complex64;

use super::EstimationError;
use crate::weights::WeightsMatrix;

/// `ln |det(I - a W)|` from the cached eigenvalues of W.
///
/// `a` must lie strictly inside the stationary interval of W.
pub fn log_det_term(a: f64, w: &WeightsMatrix) -> Result<f64, EstimationError> {
    let (lower, upper) = w.stationary_interval();
    if !(a > lower && a < upper) {
        return Err(EstimationError::OutOfStationaryRegion { parameter: "a", value: a, lower, upper });
    }
    Ok(log_det_unchecked(a, w.eigenvalues()))
}

/// `sum_i ln |1 - a w_i|`; complex-conjugate pairs contribute their modulus.
pub fn log_det_unchecked(a: f64, eigenvalues: &[Complex64]) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    eigenvalues
        .iter()
        .map(|z| {
            let re = 1.0 - a * z.re;
            let im = a * z.im;
            if im == 0.0 {
                re.abs().ln()
            } else {
                0.5 * (re * re + im * im).ln()
            }
        })
        .sum()
}

/// Derivative of [`log_det_unchecked`] in `a`: `-sum_i Re(w_i / (1 - a w_i))`.
pub(crate) fn log_det_derivative(a: f64, eigenvalues: &[Complex64]) -> f64 {
    -eigenvalues.iter().map(|z| (z / (1.0 - a * z)).re).sum::<f64>()
}
