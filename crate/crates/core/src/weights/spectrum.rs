use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::WeightsMatrix;

/// Eigen-structure of a weights matrix.
///
/// When W is similar to a symmetric matrix through a positive diagonal scaling
/// (`r_i w_ij = r_j w_ji`, which covers symmetric weights and row-standardized
/// symmetric weights) the symmetric eigensolver is used and the reduced-form
/// sums needed for impact measures are precomputed. Otherwise the eigenvalues
/// come from the real Schur form.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// `u_k = (1' D^{-1} q_k)(q_k' D 1)` for the symmetrized eigenvectors `q_k`,
    /// so that `1'(I - aW)^{-1} 1 = sum_k u_k / (1 - a w_k)`.
    pub total_weights: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn compute(w: &WeightsMatrix) -> Self {
        let n = w.n();
        if n == 0 {
            return Self { eigenvalues: Vec::new(), total_weights: Some(Vec::new()) };
        }
        match symmetrizer(w) {
            Some(log_r) => {
                let d: Vec<f64> = log_r.iter().map(|l| (0.5 * l).exp()).collect();
                let mut s = DMatrix::zeros(n, n);
                for (i, j, v) in w.triplets() {
                    s[(i, j)] = d[i] * v / d[j];
                }
                let s = (&s + s.transpose()) * 0.5;
                let eig = SymmetricEigen::new(s);
                let q = &eig.eigenvectors;
                let total_weights: Vec<f64> = (0..n)
                    .map(|k| {
                        let col = q.column(k);
                        let a: f64 = col.iter().zip(&d).map(|(x, di)| x / di).sum();
                        let b: f64 = col.iter().zip(&d).map(|(x, di)| x * di).sum();
                        a * b
                    })
                    .collect();
                let mut eigenvalues: Vec<Complex64> = eig.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| eigenvalues[a].re.total_cmp(&eigenvalues[b].re));
                let tw: Vec<f64> = order.iter().map(|&k| total_weights[k]).collect();
                eigenvalues = order.iter().map(|&k| eigenvalues[k]).collect();
                Self { eigenvalues, total_weights: Some(tw) }
            }
            None => {
                log::debug!("weights matrix is not symmetrizable; using the real Schur form");
                let mut eigenvalues: Vec<Complex64> = w.to_dense().complex_eigenvalues().iter().copied().collect();
                eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                Self { eigenvalues, total_weights: None }
            }
        }
    }

    /// Smallest and largest eigenvalue among those with negligible imaginary part.
    pub fn real_bounds(&self) -> (f64, f64) {
        let scale = self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let reals = self.eigenvalues.iter().filter(|z| z.im.abs() <= 1e-10 * scale).map(|z| z.re);
        reals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.iter().map(|z| z * factor).collect(),
            total_weights: self.total_weights.clone(),
        }
    }
}

/// Finds `log r` with `r_i w_ij = r_j w_ji` for every stored entry, if it exists.
fn symmetrizer(w: &WeightsMatrix) -> Option<Vec<f64>> {
    let n = w.n();
    let mut log_r = vec![f64::NAN; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if !log_r[root].is_nan() {
            continue;
        }
        log_r[root] = 0.0;
        queue.push_back(root);
        while let Some(i) = queue.pop_front() {
            for (j, wij) in w.row(i) {
                let wji = w.get(j, i);
                if wji <= 0.0 {
                    return None;
                }
                let target = log_r[i] + wij.ln() - wji.ln();
                if log_r[j].is_nan() {
                    log_r[j] = target;
                    queue.push_back(j);
                } else if (log_r[j] - target).abs() > 1e-9 {
                    return None;
                }
            }
        }
    }
    Some(log_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{Normalization, NeighborGraph, Provenance};

    fn path(n: usize) -> NeighborGraph {
        let ids = (0..n).map(|i| i.to_string()).collect();
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        NeighborGraph::from_edges(ids, &edges).unwrap()
    }

    #[test]
    fn path_eigenvalues() {
        let w = WeightsMatrix::binary(&path(3), Provenance::Graph);
        let ev = w.eigenvalues();
        let s = 2f64.sqrt();
        assert!((ev[0].re + s).abs() < 1e-12);
        assert!(ev[1].re.abs() < 1e-12);
        assert!((ev[2].re - s).abs() < 1e-12);
        let row = w.normalize(Normalization::Row).unwrap();
        let (lo, hi) = row.spectral_bounds();
        assert!((hi - 1.0).abs() < 1e-12);
        assert!((lo + 1.0).abs() < 1e-12);
        assert!(row.spectrum().total_weights.is_some());
    }

    #[test]
    fn asymmetric_weights_use_schur() {
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        // directed 3-cycle: eigenvalues are the cube roots of unity
        let w = WeightsMatrix::from_triplets(
            ids,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
            Normalization::None,
            Provenance::Custom,
        )
        .unwrap();
        let sp = Spectrum::compute(&w);
        assert!(sp.total_weights.is_none());
        for z in &sp.eigenvalues {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
        assert!((sp.real_bounds().1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn total_weights_reproduce_row_sum_identity() {
        // for row-standardized W without islands, 1'(I - aW)^{-1}1 = n / (1 - a)
        let w = WeightsMatrix::binary(&path(6), Provenance::Graph).normalize(Normalization::Row).unwrap();
        let sp = w.spectrum();
        let a = 0.37;
        let tot: f64 = sp
            .eigenvalues
            .iter()
            .zip(sp.total_weights.as_ref().unwrap())
            .map(|(z, u)| u / (1.0 - a * z.re))
            .sum();
        assert!((tot - 6.0 / (1.0 - a)).abs() < 1e-10);
    }
}
