use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::spectrum::Spectrum;
use super::{ContiguityRule, NeighborGraph, WeightsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    None,
    Row,
    Spectral,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Row => "row",
            Normalization::Spectral => "spectral",
        })
    }
}

impl FromStr for Normalization {
    type Err = WeightsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "row" => Ok(Self::Row),
            "spectral" => Ok(Self::Spectral),
            other => Err(WeightsError::Format(format!("unknown normalization `{other}`"))),
        }
    }
}

/// How the weights were constructed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Provenance {
    Contiguity { rule: ContiguityRule, order: usize, exact: bool },
    InverseDistance,
    /// Binary weights from an externally supplied neighbour list.
    Graph,
    Custom,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Contiguity { rule, order, exact } => {
                write!(f, "contiguity:{rule}:{order}")?;
                if *exact {
                    f.write_str(":exact")?;
                }
                Ok(())
            }
            Provenance::InverseDistance => f.write_str("inverse_distance"),
            Provenance::Graph => f.write_str("graph"),
            Provenance::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Provenance {
    type Err = WeightsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WeightsError::Format(format!("unknown provenance `{s}`"));
        match s {
            "inverse_distance" => return Ok(Self::InverseDistance),
            "graph" => return Ok(Self::Graph),
            "custom" => return Ok(Self::Custom),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["contiguity", rule, order, rest @ ..] => Ok(Self::Contiguity {
                rule: rule.parse().map_err(|_| bad())?,
                order: order.parse().map_err(|_| bad())?,
                exact: match rest {
                    [] => false,
                    ["exact"] => true,
                    _ => return Err(bad()),
                },
            }),
            _ => Err(bad()),
        }
    }
}

/// Sparse spatial weights matrix in compressed-row form with a zero diagonal.
///
/// The eigenvalues are computed on first use and cached; clones made after that
/// share the cache.
#[derive(Clone)]
pub struct WeightsMatrix {
    region_ids: Vec<String>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    normalization: Normalization,
    provenance: Provenance,
    spectrum: OnceLock<Arc<Spectrum>>,
}

impl fmt::Debug for WeightsMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightsMatrix")
            .field("n", &self.n())
            .field("nnz", &self.nnz())
            .field("normalization", &self.normalization)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl PartialEq for WeightsMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.region_ids == other.region_ids
            && self.row_ptr == other.row_ptr
            && self.cols == other.cols
            && self.vals == other.vals
            && self.normalization == other.normalization
            && self.provenance == other.provenance
    }
}

impl WeightsMatrix {
    /// Builds a matrix from `(row, col, weight)` triples. Duplicate positions are an
    /// error, as are diagonal, non-positive and non-finite entries.
    pub fn from_triplets(
        region_ids: Vec<String>,
        triplets: Vec<(usize, usize, f64)>,
        normalization: Normalization,
        provenance: Provenance,
    ) -> Result<Self, WeightsError> {
        let n = region_ids.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(WeightsError::InvalidEntry(format!("index ({i}, {j}) outside {n}x{n}")));
            }
            if i == j {
                return Err(WeightsError::InvalidEntry(format!("diagonal entry at region `{}`", region_ids[i])));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(WeightsError::InvalidEntry(format!(
                    "weight {v} at ({}, {}) must be positive and finite",
                    region_ids[i], region_ids[j]
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(WeightsError::InvalidEntry(format!("duplicate entry in row `{}`", region_ids[i])));
            }
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            region_ids,
            row_ptr,
            cols,
            vals,
            normalization,
            provenance,
            spectrum: OnceLock::new(),
        })
    }

    /// Binary (0/1) weights from a neighbour graph.
    pub fn binary(graph: &NeighborGraph, provenance: Provenance) -> Self {
        let mut row_ptr = Vec::with_capacity(graph.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for i in 0..graph.len() {
            cols.extend_from_slice(graph.neighbors(i));
            row_ptr.push(cols.len());
        }
        let vals = vec![1.0; cols.len()];
        Self {
            region_ids: graph.region_ids().to_vec(),
            row_ptr,
            cols,
            vals,
            normalization: Normalization::None,
            provenance,
            spectrum: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.region_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Column indices and weights of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// All stored entries as `(row, col, weight)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Spatial lag `W x`.
    pub fn lag(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "lag: length mismatch");
        (0..self.n()).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `W' x`.
    pub fn lag_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "lag_transpose: length mismatch");
        let mut out = vec![0.0; self.n()];
        for (i, j, v) in self.triplets() {
            out[j] += v * x[i];
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.vals.iter().sum()
    }

    /// Rows without any stored entry.
    pub fn islands(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.row_len(i) == 0).collect()
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.triplets().all(|(i, j, _)| self.get(j, i) > 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.triplets().all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol * v.abs().max(1.0))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n(), self.n());
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Cached eigen-structure of W.
    pub(crate) fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| Arc::new(Spectrum::compute(self)))
    }

    /// Eigenvalues of W (complex in general).
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.spectrum().eigenvalues
    }

    /// Smallest and largest real eigenvalue `(omega_min, omega_max)`.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        self.spectrum().real_bounds()
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Open interval of coefficients `a` for which `I - aW` is invertible along the
    /// real line through zero: `(-1, 1)` for spectral-normalized W, otherwise
    /// `(1/omega_min, 1/omega_max)`.
    pub fn stationary_interval(&self) -> (f64, f64) {
        if self.normalization == Normalization::Spectral {
            return (-1.0, 1.0);
        }
        let (lo, hi) = self.spectral_bounds();
        let lower = if lo < 0.0 { 1.0 / lo } else { f64::NEG_INFINITY };
        let upper = if hi > 0.0 { 1.0 / hi } else { f64::INFINITY };
        (lower, upper)
    }

    /// Stationary interval shrunk by `1e-6` on both ends; the search region of the
    /// maximum-likelihood estimators.
    pub fn parameter_space(&self) -> (f64, f64) {
        let (lo, hi) = self.stationary_interval();
        (lo.max(-1e6) + 1e-6, hi.min(1e6) - 1e-6)
    }

    pub fn normalize(&self, scheme: Normalization) -> Result<Self, WeightsError> {
        super::normalize(self, scheme)
    }

    pub(crate) fn with_values(&self, vals: Vec<f64>, normalization: Normalization) -> Self {
        Self {
            region_ids: self.region_ids.clone(),
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
            normalization,
            provenance: self.provenance.clone(),
            spectrum: OnceLock::new(),
        }
    }

    pub(crate) fn seed_spectrum(&self, spectrum: Spectrum) {
        let _ = self.spectrum.set(Arc::new(spectrum));
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Matrix whose `i`-th region is this matrix's `perm[i]`-th region.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let trip = perm
            .iter()
            .enumerate()
            .flat_map(|(new_i, &old_i)| self.row(old_i).map(move |(j, v)| (new_i, j, v)).collect::<Vec<_>>())
            .map(|(i, j, v)| (i, inverse[j], v))
            .collect();
        let ids = perm.iter().map(|&o| self.region_ids[o].clone()).collect();
        Self::from_triplets(ids, trip, self.normalization, self.provenance.clone())
            .expect("permutation preserves validity")
    }

    /// Content hash of the canonical `.wm` serialization.
    pub fn fingerprint(&self) -> String {
        let text = super::wm::format_wm(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
