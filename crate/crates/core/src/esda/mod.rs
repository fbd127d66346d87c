//! Exploratory spatial data analysis: descriptive statistics, global and local
//! Moran's I, and Lagrange-multiplier diagnostics on OLS residuals.

mod describe;
mod diagnostics;
mod lisa;
mod moran;

pub use describe::{describe, CorrelationMatrix, DescriptiveReport, GroupContrast, VariableSummary};
pub use diagnostics::{lm_diagnostics, DiagnosticsReport, TestStatistic};
pub use lisa::{lisa_feature_collection, local_moran, LisaResult, LocalMoran, Quadrant};
pub use moran::{global_moran, moran_scatter, MoranResult};

#[derive(Debug, thiserror::Error)]
pub enum EsdaError {
    #[error("ConstantVector: variable has zero variance")]
    ConstantVector,
    #[error("ConstantColumn: column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("LengthMismatch: {values} values for {regions} regions")]
    LengthMismatch { values: usize, regions: usize },
    #[error("EmptyWeights: weights matrix has no non-zero entries")]
    EmptyWeights,
    #[error("TooFewPermutations: at least {required} permutations required, got {got}")]
    TooFewPermutations { required: usize, got: usize },
    #[error("InvalidGroup: column `{column}` must be coded 0/1 with both groups present")]
    InvalidGroup { column: String },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("MissingDesign: diagnostics need a least-squares fit computed in this process")]
    MissingDesign,
    #[error(transparent)]
    Data(#[from] crate::ingest::IngestError),
}

/// Deviations from the mean; errors on a constant or non-finite vector.
pub(crate) fn standardize(x: &[f64]) -> Result<Vec<f64>, EsdaError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EsdaError::InvalidArgument("non-finite value".into()));
    }
    let m = crate::stats::mean(x);
    let z: Vec<f64> = x.iter().map(|v| v - m).collect();
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if z.iter().all(|v| v.abs() <= 1e-14 * scale) {
        return Err(EsdaError::ConstantVector);
    }
    Ok(z)
}
