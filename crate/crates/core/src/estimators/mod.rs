//! OLS / SLX by least squares and the spatial family by maximum likelihood.

mod logdet;
mod ml;
mod ols;
pub mod optimize;
mod spec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use logdet::{log_det_term, log_det_unchecked};
pub use ml::{fit_spatial, full_loglik, MlOptions};
pub use ols::fit_ols;
pub use spec::{ModelKind, ModelSpec, SeMode};

use crate::ingest::AttributeTable;
use crate::stats;
use crate::weights::WeightsMatrix;

#[derive(Debug, thiserror::Error)]
pub enum EstimationError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("SingularDesign: column `{column}` is collinear ({combination})")]
    SingularDesign { column: String, combination: String },
    #[error("RankDeficientAfterLag: lagged column `{column}` is collinear ({combination})")]
    RankDeficientAfterLag { column: String, combination: String },
    #[error("InsufficientObservations: n = {n} must exceed k = {k}")]
    InsufficientObservations { n: usize, k: usize },
    #[error("MissingWeights: model {0} needs a weights matrix")]
    MissingWeights(ModelKind),
    #[error("DimensionMismatch: data has {data} rows, weights matrix is {weights}x{weights}")]
    DimensionMismatch { data: usize, weights: usize },
    #[error("OutOfStationaryRegion: {parameter} = {value} outside ({lower}, {upper})")]
    OutOfStationaryRegion {
        parameter: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("NonConvergence: {iterations} iterations without convergence (last rho = {rho}, lambda = {lambda}, loglik = {loglik})")]
    NonConvergence {
        iterations: usize,
        rho: f64,
        lambda: f64,
        loglik: f64,
    },
    #[error("SingularHessian: the numerical Hessian at the optimum is not invertible")]
    SingularHessian,
    #[error(transparent)]
    Data(#[from] crate::ingest::IngestError),
}

/// Estimated model with its covariance and fit statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub region_ids: Vec<String>,
    /// Names of the intercept (`const`) and regressors, aligned with `beta`.
    pub beta_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Names `W_<x>` of the lagged regressors, aligned with `theta`.
    pub theta_names: Vec<String>,
    pub theta: Vec<f64>,
    pub rho: f64,
    pub lambda: f64,
    pub sigma2: f64,
    /// Parameter order of `vcov` and `std_errors`.
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub vcov: Vec<Vec<f64>>,
    pub loglik: f64,
    pub n: usize,
    pub k: usize,
    /// R-squared for least squares; squared fitted/observed correlation for ML fits.
    pub r2: f64,
    pub adj_r2: Option<f64>,
    pub r2_kind: String,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub weights_fingerprint: Option<String>,
    pub iterations: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub(crate) design: Option<Design>,
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
}

impl FitResult {
    /// Coefficient table with t (least squares) or z (ML) statistics.
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let df = (self.n - self.k) as f64;
        self.param_names
            .iter()
            .zip(&self.params)
            .zip(&self.std_errors)
            .map(|((name, &est), &se)| {
                let stat = est / se;
                let p = if self.spec.kind.is_ml() {
                    stats::normal_two_sided(stat)
                } else {
                    stats::student_two_sided(stat, df)
                };
                Coefficient { name: name.clone(), estimate: est, std_error: se, statistic: stat, p_value: p }
            })
            .collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<Coefficient> {
        self.coefficients().into_iter().find(|c| c.name == name)
    }

    pub fn vcov_matrix(&self) -> DMatrix<f64> {
        let p = self.vcov.len();
        DMatrix::from_fn(p, p, |i, j| self.vcov[i][j])
    }

    /// Value of a regressor's direct coefficient (`beta`) by variable name.
    pub fn beta_of(&self, name: &str) -> Option<f64> {
        self.beta_names.iter().position(|n| n == name).map(|i| self.beta[i])
    }

    /// Lag coefficient (`theta`) by the un-lagged variable name; zero when not lagged.
    pub fn theta_of(&self, name: &str) -> f64 {
        self.theta_names.iter().position(|n| n == &lag_name(name)).map(|i| self.theta[i]).unwrap_or(0.0)
    }
}

pub(crate) fn lag_name(x: &str) -> String {
    format!("W_{x}")
}

/// Response and design matrix `[1, X, W X_d]` ready for estimation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Design {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub names: Vec<String>,
    pub n_beta: usize,
    pub n_theta: usize,
}

impl Design {
    pub fn build(spec: &ModelSpec, table: &AttributeTable, w: Option<&WeightsMatrix>) -> Result<Self, EstimationError> {
        spec.validate()?;
        let n = table.n_rows();
        if let Some(w) = w {
            if w.n() != n {
                return Err(EstimationError::DimensionMismatch { data: n, weights: w.n() });
            }
        }
        let y = DVector::from_column_slice(table.column(&spec.response)?);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut names = Vec::new();
        if spec.intercept {
            cols.push(vec![1.0; n]);
            names.push("const".to_string());
        }
        for r in &spec.regressors {
            cols.push(table.column(r)?.to_vec());
            names.push(r.clone());
        }
        let n_beta = cols.len();
        if !spec.durbin.is_empty() {
            let w = w.ok_or(EstimationError::MissingWeights(spec.kind))?;
            for d in &spec.durbin {
                cols.push(w.lag(table.column(d)?));
                names.push(lag_name(d));
            }
        }
        let n_theta = cols.len() - n_beta;
        let k = cols.len();
        if n <= k {
            return Err(EstimationError::InsufficientObservations { n, k });
        }
        let z = DMatrix::from_fn(n, k, |r, c| cols[c][r]);
        if let Some(dep) = crate::linalg::first_dependency(&z) {
            let combination = if dep.combination.is_empty() {
                "zero column".to_string()
            } else {
                dep.combination
                    .iter()
                    .map(|(j, c)| format!("{c:.6}*{}", names[*j]))
                    .collect::<Vec<_>>()
                    .join(" + ")
            };
            let column = names[dep.column].clone();
            return Err(if dep.column >= n_beta {
                EstimationError::RankDeficientAfterLag { column, combination }
            } else {
                EstimationError::SingularDesign { column, combination }
            });
        }
        Ok(Self { y, z, names, n_beta, n_theta })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }
}

/// Fits any member of the family, dispatching to least squares or ML.
pub fn fit(spec: &ModelSpec, table: &AttributeTable, w: Option<&WeightsMatrix>) -> Result<FitResult, EstimationError> {
    if spec.kind.is_ml() {
        let w = w.ok_or(EstimationError::MissingWeights(spec.kind))?;
        fit_spatial(spec, table, w)
    } else {
        fit_ols(spec, table, w)
    }
}

pub(crate) fn pseudo_r2(fitted: &[f64], y: &[f64]) -> f64 {
    let r = stats::pearson(fitted, y);
    r * r
}
