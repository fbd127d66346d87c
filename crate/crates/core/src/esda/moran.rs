use rayon::prelude::*;
use rand::seq::SliceRandom;
use serde::Serialize;

use super::{standardize, EsdaError};
use crate::rng::substream;
use crate::stats;
use crate::weights::WeightsMatrix;

/// Global Moran's I with its normal-approximation and permutation inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoranResult {
    pub i: f64,
    /// `-1 / (n - 1)`.
    pub expectation: f64,
    /// Variance under the normality assumption.
    pub variance: f64,
    pub z_score: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub pseudo_p: Option<f64>,
    pub permuted_mean: Option<f64>,
    pub permuted_sd: Option<f64>,
    pub n_used: usize,
}

/// `S1 = 1/2 sum_ij (w_ij + w_ji)^2` and `S2 = sum_i (w_i. + w_.i)^2`.
pub(crate) fn s1_s2(w: &WeightsMatrix) -> (f64, f64) {
    let mut s1 = 0.0;
    for (i, j, v) in w.triplets() {
        s1 += v * v + v * w.get(j, i);
    }
    let rows = w.row_sums();
    let cols = w.lag_transpose(&vec![1.0; w.n()]);
    let s2 = rows.iter().zip(&cols).map(|(r, c)| (r + c).powi(2)).sum();
    (s1, s2)
}

fn moran_of(z: &[f64], w: &WeightsMatrix, s0: f64, zz: f64) -> f64 {
    let lag = w.lag(z);
    let num: f64 = z.iter().zip(&lag).map(|(a, b)| a * b).sum();
    z.len() as f64 / s0 * num / zz
}

/// Two-sided permutation p-value: doubled smaller tail, capped at one.
pub(crate) fn folded_pseudo_p(observed: f64, permuted: &[f64]) -> f64 {
    let upper = permuted.iter().filter(|&&v| v >= observed).count();
    let lower = permuted.iter().filter(|&&v| v <= observed).count();
    (2.0 * (upper.min(lower) + 1) as f64 / (permuted.len() + 1) as f64).min(1.0)
}

pub fn global_moran(x: &[f64], w: &WeightsMatrix, permutations: usize, seed: u64) -> Result<MoranResult, EsdaError> {
    let n = w.n();
    if x.len() != n {
        return Err(EsdaError::LengthMismatch { values: x.len(), regions: n });
    }
    let z = standardize(x)?;
    let s0 = w.s0();
    if s0 == 0.0 {
        return Err(EsdaError::EmptyWeights);
    }
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let i = moran_of(&z, w, s0, zz);

    let nf = n as f64;
    let expectation = -1.0 / (nf - 1.0);
    let (s1, s2) = s1_s2(w);
    let variance = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0) - expectation * expectation;
    let z_score = (i - expectation) / variance.sqrt();

    let (pseudo_p, permuted_mean, permuted_sd) = if permutations > 0 {
        let sims: Vec<f64> = (0..permutations)
            .into_par_iter()
            .map(|p| {
                let mut rng = substream(seed, p as u64);
                let mut zp = z.clone();
                zp.shuffle(&mut rng);
                moran_of(&zp, w, s0, zz)
            })
            .collect();
        let mean = stats::mean(&sims);
        let sd = if sims.len() > 1 { stats::sample_variance(&sims).sqrt() } else { 0.0 };
        (Some(folded_pseudo_p(i, &sims)), Some(mean), Some(sd))
    } else {
        (None, None, None)
    };

    Ok(MoranResult {
        i,
        expectation,
        variance,
        z_score,
        p_value: stats::normal_two_sided(z_score),
        permutations,
        pseudo_p,
        permuted_mean,
        permuted_sd,
        n_used: n,
    })
}

/// Moran scatterplot coordinates `(z_i, (W z)_i)` of the standardized variable.
pub fn moran_scatter(x: &[f64], w: &WeightsMatrix) -> Result<Vec<(f64, f64)>, EsdaError> {
    if x.len() != w.n() {
        return Err(EsdaError::LengthMismatch { values: x.len(), regions: w.n() });
    }
    let z = standardize(x)?;
    let lag = w.lag(&z);
    Ok(z.into_iter().zip(lag).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{NeighborGraph, Normalization, Provenance};

    fn path3() -> WeightsMatrix {
        let ids = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let g = NeighborGraph::from_edges(ids, &[(0, 1), (1, 2)]).unwrap();
        WeightsMatrix::binary(&g, Provenance::Graph).normalize(Normalization::Row).unwrap()
    }

    #[test]
    fn path_by_hand() {
        // z = [0, 1, -1]; Wz = [1, -0.5, 1]; z'Wz = -1.5; z'z = 2; I = 3/3 * -1.5/2
        let r = global_moran(&[1.0, 2.0, 0.0], &path3(), 0, 0).unwrap();
        assert!((r.i + 0.75).abs() < 1e-12);
        assert_eq!(r.expectation, -0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(global_moran(&[1.0, 1.0, 1.0], &path3(), 0, 0), Err(EsdaError::ConstantVector)));
        assert!(matches!(global_moran(&[1.0, 2.0], &path3(), 0, 0), Err(EsdaError::LengthMismatch { .. })));
    }

    #[test]
    fn pseudo_p_bounds_and_determinism() {
        let x = [3.0, 1.0, 2.0];
        let a = global_moran(&x, &path3(), 99, 11).unwrap();
        let b = global_moran(&x, &path3(), 99, 11).unwrap();
        assert_eq!(a, b);
        let p = a.pseudo_p.unwrap();
        assert!((1.0 / 100.0..=1.0).contains(&p));
        assert_eq!(folded_pseudo_p(10.0, &[0.0; 9]), 0.2);
    }
}
