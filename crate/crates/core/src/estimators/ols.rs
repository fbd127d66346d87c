use nalgebra::{DMatrix, DVector};

use super::{Design, EstimationError, FitResult, ModelKind, ModelSpec, SeMode};
use crate::ingest::AttributeTable;
use crate::linalg;
use crate::weights::WeightsMatrix;

/// Least squares for OLS and SLX, with classical or HC1 covariance.
pub fn fit_ols(spec: &ModelSpec, table: &AttributeTable, w: Option<&WeightsMatrix>) -> Result<FitResult, EstimationError> {
    if !matches!(spec.kind, ModelKind::Ols | ModelKind::Slx) {
        return Err(EstimationError::InvalidSpec(format!("fit_ols cannot estimate {}", spec.kind)));
    }
    if spec.kind == ModelKind::Slx && w.is_none() {
        return Err(EstimationError::MissingWeights(spec.kind));
    }
    let design = Design::build(spec, table, w)?;
    let mut fit = ols_on_design(&design, spec.se_mode)?;
    fit.spec = spec.clone();
    fit.region_ids = table.region_ids().to_vec();
    fit.weights_fingerprint = if spec.kind == ModelKind::Slx { w.map(WeightsMatrix::fingerprint) } else { None };
    Ok(fit)
}

pub(crate) fn ols_on_design(design: &Design, se_mode: SeMode) -> Result<FitResult, EstimationError> {
    let (n, k) = (design.n(), design.k());
    let z = &design.z;
    let y = &design.y;
    let b = linalg::lstsq(z, y).ok_or_else(|| EstimationError::SingularDesign {
        column: design.names.last().cloned().unwrap_or_default(),
        combination: "numerically rank deficient".into(),
    })?;
    let fitted = z * &b;
    let e: DVector<f64> = y - &fitted;
    let ssr = e.dot(&e);
    let ztz_inv = linalg::sym_inverse(&(z.transpose() * z)).ok_or(EstimationError::SingularHessian)?;
    let df = (n - k) as f64;
    let vcov = match se_mode {
        SeMode::Classical => &ztz_inv * (ssr / df),
        SeMode::Robust => hc1(z, &e, &ztz_inv),
    };
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - ssr / tss;
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
    let nf = n as f64;
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (ssr / nf).ln() + 1.0);

    let params: Vec<f64> = b.iter().copied().collect();
    let std_errors = (0..k).map(|i| vcov[(i, i)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        spec: ModelSpec::new(ModelKind::Ols, "", &[]),
        region_ids: Vec::new(),
        beta_names: design.names[..design.n_beta].to_vec(),
        beta: params[..design.n_beta].to_vec(),
        theta_names: design.names[design.n_beta..].to_vec(),
        theta: params[design.n_beta..].to_vec(),
        rho: 0.0,
        lambda: 0.0,
        sigma2: ssr / df,
        param_names: design.names.clone(),
        params,
        std_errors,
        vcov: rows(&vcov),
        loglik,
        n,
        k,
        r2,
        adj_r2: Some(adj),
        r2_kind: "adjusted".into(),
        residuals: e.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        weights_fingerprint: None,
        iterations: 0,
        warnings: Vec::new(),
        design: Some(design.clone()),
    })
}

/// HC1: `n/(n-k) (Z'Z)^{-1} Z' diag(e^2) Z (Z'Z)^{-1}`.
fn hc1(z: &DMatrix<f64>, e: &DVector<f64>, ztz_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = (z.nrows(), z.ncols());
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        let row = z.row(i);
        meat += row.transpose() * row * (e[i] * e[i]);
    }
    let v = ztz_inv * meat * ztz_inv * (n as f64 / (n - k) as f64);
    (&v + v.transpose()) * 0.5
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: Vec<(&str, Vec<f64>)>) -> AttributeTable {
        let n = cols[0].1.len();
        AttributeTable::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            cols.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let t = table(vec![("y", y), ("x", x)]);
        let fit = fit_ols(&ModelSpec::new(ModelKind::Ols, "y", &["x"]), &t, None).unwrap();
        assert!((fit.beta_of("x").unwrap() - 2.0).abs() < 1e-12);
        assert!((fit.beta_of("const").unwrap() - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.rho, 0.0);
        assert_eq!(fit.lambda, 0.0);
    }

    #[test]
    fn collinear_columns_named() {
        let a: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v + 2.0).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let t = table(vec![("y", y), ("a", a), ("b", b)]);
        let err = fit_ols(&ModelSpec::new(ModelKind::Ols, "y", &["a", "b"]), &t, None).unwrap_err();
        match err {
            EstimationError::SingularDesign { column, combination } => {
                assert_eq!(column, "b");
                assert!(combination.contains("const") && combination.contains('a'), "{combination}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let t = table(vec![("y", vec![1.0, 2.0]), ("a", vec![0.0, 1.0])]);
        assert!(matches!(
            fit_ols(&ModelSpec::new(ModelKind::Ols, "y", &["a"]), &t, None),
            Err(EstimationError::InsufficientObservations { .. })
        ));
    }
}
