use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::moran::s1_s2;
use super::EsdaError;
use crate::estimators::{FitResult, ModelKind};
use crate::linalg;
use crate::stats;
use crate::weights::WeightsMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestStatistic {
    pub statistic: f64,
    pub p_value: f64,
}

/// Spatial-dependence tests on least-squares residuals for one weights matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub weights: String,
    /// Moran's I of the residuals.
    pub moran_i: f64,
    /// Standardized residual Moran statistic and its normal p-value.
    pub moran_residual: TestStatistic,
    pub lm_error: TestStatistic,
    pub robust_lm_error: TestStatistic,
    pub lm_lag: TestStatistic,
    pub robust_lm_lag: TestStatistic,
    pub n: usize,
    pub k: usize,
}

fn chi2(stat: f64) -> TestStatistic {
    TestStatistic { statistic: stat, p_value: stats::chi2_upper(stat, 1.0) }
}

/// Residual Moran test and the LM-error / LM-lag score tests with their robust
/// forms, from an OLS or SLX fit.
pub fn lm_diagnostics(ols: &FitResult, w: &WeightsMatrix) -> Result<DiagnosticsReport, EsdaError> {
    if !matches!(ols.spec.kind, ModelKind::Ols | ModelKind::Slx) {
        return Err(EsdaError::InvalidArgument(format!("diagnostics need a least-squares fit, got {}", ols.spec.kind)));
    }
    let design = ols.design.as_ref().ok_or(EsdaError::MissingDesign)?;
    let (n, k) = (design.n(), design.k());
    if w.n() != n {
        return Err(EsdaError::LengthMismatch { values: n, regions: w.n() });
    }
    let x = &design.z;
    let y = design.y.as_slice();
    let e = &ols.residuals;
    let nf = n as f64;

    let ee: f64 = e.iter().map(|v| v * v).sum();
    let sigma2 = ee / nf;
    let we = w.lag(e);
    let wy = w.lag(y);
    let d_lambda = dot(e, &we) / sigma2;
    let d_rho = dot(e, &wy) / sigma2;

    let (s1, _) = s1_s2(w);
    // tr(W'W + WW) = sum w_ij^2 + sum w_ij w_ji
    let t = s1;

    let wxb = DVector::from_vec(w.lag(&ols.fitted));
    let coef = linalg::lstsq(x, &wxb).ok_or(EsdaError::InvalidArgument("singular design".into()))?;
    let m_wxb = &wxb - x * coef;
    let d = t + m_wxb.dot(&m_wxb) / sigma2;

    let lm_error = d_lambda * d_lambda / t;
    let lm_lag = d_rho * d_rho / d;
    let robust_lm_error = (d_lambda - t / d * d_rho).powi(2) / (t * (1.0 - t / d));
    let robust_lm_lag = (d_rho - d_lambda).powi(2) / (d - t);

    let s0 = w.s0();
    let moran_i = nf / s0 * dot(e, &we) / ee;
    let (tr_mw, tr_mwmwt, tr_mwmw) = residual_traces(x, w);
    let df = (n - k) as f64;
    let expectation = nf / s0 * tr_mw / df;
    let variance = (nf / s0).powi(2) * (tr_mwmwt + tr_mwmw + tr_mw * tr_mw) / (df * (df + 2.0)) - expectation * expectation;
    let z = (moran_i - expectation) / variance.sqrt();

    Ok(DiagnosticsReport {
        weights: w.provenance().to_string(),
        moran_i,
        moran_residual: TestStatistic { statistic: z, p_value: stats::normal_two_sided(z) },
        lm_error: chi2(lm_error),
        robust_lm_error: chi2(robust_lm_error),
        lm_lag: chi2(lm_lag),
        robust_lm_lag: chi2(robust_lm_lag),
        n,
        k,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `tr(MW)`, `tr(MWMW')` and `tr(MWMW)` with `M = I - X (X'X)^{-1} X'`,
/// using `M W = W - X (X'X)^{-1} X' W`.
fn residual_traces(x: &DMatrix<f64>, w: &WeightsMatrix) -> (f64, f64, f64) {
    let wd = w.to_dense();
    let xtx_inv = linalg::sym_inverse(&(x.transpose() * x)).expect("design has full rank");
    let proj = |m: &DMatrix<f64>| m - x * (&xtx_inv * (x.transpose() * m));
    let a = proj(&wd);
    let b = proj(&wd.transpose());
    let n = a.nrows();
    let (mut t1, mut t2) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            t1 += a[(i, j)] * b[(j, i)];
            t2 += a[(i, j)] * a[(j, i)];
        }
    }
    (a.trace(), t1, t2)
}
