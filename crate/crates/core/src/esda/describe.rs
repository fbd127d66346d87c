use serde::Serialize;

use super::EsdaError;
use crate::ingest::AttributeTable;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    /// Moment skewness `m3 / m2^1.5`.
    pub skewness: f64,
    pub min: f64,
    pub max: f64,
}

/// Welch contrast of one variable between the `1` and `0` groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupContrast {
    pub variable: String,
    pub group_column: String,
    pub mean_group1: f64,
    pub mean_group0: f64,
    pub n_group1: usize,
    pub n_group0: usize,
    /// `(mean_1 - mean_0) / sqrt(s1^2/n1 + s0^2/n0)`.
    pub welch_t: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub p_values: Vec<Vec<f64>>,
    pub stars: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveReport {
    pub variables: Vec<VariableSummary>,
    pub contrasts: Vec<GroupContrast>,
    pub correlations: CorrelationMatrix,
}

fn summarize(name: &str, x: &[f64]) -> Result<VariableSummary, EsdaError> {
    let n = x.len();
    let mean = stats::mean(x);
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n as f64;
    if m2 <= 0.0 || n < 2 {
        return Err(EsdaError::ConstantColumn(name.to_string()));
    }
    Ok(VariableSummary {
        name: name.to_string(),
        n,
        mean,
        sd: stats::sample_variance(x).sqrt(),
        skewness: m3 / m2.powf(1.5),
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn welch(variable: &str, group_column: &str, x: &[f64], g: &[f64]) -> Result<GroupContrast, EsdaError> {
    let a: Vec<f64> = x.iter().zip(g).filter(|(_, &gi)| gi == 1.0).map(|(v, _)| *v).collect();
    let b: Vec<f64> = x.iter().zip(g).filter(|(_, &gi)| gi == 0.0).map(|(v, _)| *v).collect();
    if a.len() < 2 || b.len() < 2 {
        return Err(EsdaError::InvalidGroup { column: group_column.to_string() });
    }
    let (ma, mb) = (stats::mean(&a), stats::mean(&b));
    let (va, vb) = (stats::sample_variance(&a) / a.len() as f64, stats::sample_variance(&b) / b.len() as f64);
    let se2 = va + vb;
    let (t, df) = if se2 > 0.0 {
        let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
        ((ma - mb) / se2.sqrt(), df)
    } else if ma == mb {
        (0.0, (a.len() + b.len() - 2) as f64)
    } else {
        (f64::INFINITY.copysign(ma - mb), (a.len() + b.len() - 2) as f64)
    };
    Ok(GroupContrast {
        variable: variable.to_string(),
        group_column: group_column.to_string(),
        mean_group1: ma,
        mean_group0: mb,
        n_group1: a.len(),
        n_group0: b.len(),
        welch_t: t,
        df,
        p_value: stats::student_two_sided(t, df),
    })
}

fn correlations(names: &[String], cols: &[&[f64]]) -> CorrelationMatrix {
    let k = cols.len();
    let n = cols.first().map_or(0, |c| c.len()) as f64;
    let mut r = vec![vec![1.0; k]; k];
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let rij = stats::pearson(cols[i], cols[j]).clamp(-1.0, 1.0);
            let t = rij * ((n - 2.0) / (1.0 - rij * rij)).sqrt();
            let pij = if rij.abs() == 1.0 { 0.0 } else { stats::student_two_sided(t, n - 2.0) };
            r[i][j] = rij;
            r[j][i] = rij;
            p[i][j] = pij;
            p[j][i] = pij;
        }
    }
    let stars = (0..k)
        .map(|i| (0..k).map(|j| if i == j { String::new() } else { stats::stars(p[i][j]).to_string() }).collect())
        .collect();
    CorrelationMatrix { names: names.to_vec(), r, p_values: p, stars }
}

/// Means, spreads, skewness, optional 0/1 group contrasts, and the Pearson
/// correlation matrix of the listed columns.
pub fn describe(table: &AttributeTable, variables: &[String], group_by: Option<&str>) -> Result<DescriptiveReport, EsdaError> {
    if variables.is_empty() {
        return Err(EsdaError::InvalidArgument("no variables to describe".into()));
    }
    let cols: Vec<&[f64]> = variables.iter().map(|v| table.column(v)).collect::<Result<_, _>>()?;
    let summaries = variables.iter().zip(&cols).map(|(v, c)| summarize(v, c)).collect::<Result<Vec<_>, _>>()?;

    let mut contrasts = Vec::new();
    if let Some(gcol) = group_by {
        let g = table.column(gcol)?;
        if g.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(EsdaError::InvalidGroup { column: gcol.to_string() });
        }
        for (v, c) in variables.iter().zip(&cols) {
            if v != gcol {
                contrasts.push(welch(v, gcol, c, g)?);
            }
        }
    }
    Ok(DescriptiveReport { variables: summaries, contrasts, correlations: correlations(variables, &cols) })
}
