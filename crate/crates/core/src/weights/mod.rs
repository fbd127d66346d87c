//! Spatial weights: contiguity and inverse-distance construction, normalization,
//! eigenvalue bounds and `.wm` serialization.

mod graph;
mod matrix;
pub(crate) mod spectrum;
pub mod wm;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use graph::{GraphError, NeighborGraph};
pub use matrix::{Normalization, Provenance, WeightsMatrix};
pub use wm::{format_wm, parse_wm, read_wm};

use crate::ingest::GeometrySet;

/// Mean Earth radius in kilometres used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default coordinate snapping grid, in degrees.
pub const DEFAULT_SNAP: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("DegenerateGeometry: region `{0}` has zero area")]
    DegenerateGeometry(String),
    #[error("CoincidentCentroids: regions `{0}` and `{1}` share a centroid")]
    CoincidentCentroids(String, String),
    #[error("ZeroMatrix: weights matrix has no entries")]
    ZeroMatrix,
    #[error("InvalidOrder: contiguity order must be >= 1")]
    InvalidOrder,
    #[error("TooFewRegions: need at least {needed} regions, got {got}")]
    TooFewRegions { needed: usize, got: usize },
    #[error("InvalidSnap: snap tolerance must be positive and finite, got {0}")]
    InvalidSnap(f64),
    #[error("InvalidEntry: {0}")]
    InvalidEntry(String),
    #[error("Format: {0}")]
    Format(String),
    #[error("Io: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContiguityRule {
    /// Shared boundary segment of positive length.
    Rook,
    /// Shared boundary point.
    Queen,
}

impl fmt::Display for ContiguityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContiguityRule::Rook => "rook",
            ContiguityRule::Queen => "queen",
        })
    }
}

impl FromStr for ContiguityRule {
    type Err = WeightsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rook" => Ok(Self::Rook),
            "queen" => Ok(Self::Queen),
            other => Err(WeightsError::Format(format!("unknown contiguity rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContiguityOptions {
    pub snap_tolerance: f64,
    /// Use graph distance exactly equal to the order instead of `<=`.
    pub exact_order: bool,
}

impl Default for ContiguityOptions {
    fn default() -> Self {
        Self { snap_tolerance: DEFAULT_SNAP, exact_order: false }
    }
}

type Key = (i64, i64);

fn snap(p: [f64; 2], tol: f64) -> Key {
    ((p[0] / tol).round() as i64, (p[1] / tol).round() as i64)
}

/// Contiguity graph from shared polygon vertices (queen) or shared edges (rook)
/// after snapping coordinates to a grid of `snap_tolerance`.
pub fn build_contiguity(
    geometry: &GeometrySet,
    rule: ContiguityRule,
    order: usize,
    options: ContiguityOptions,
) -> Result<NeighborGraph, WeightsError> {
    if geometry.is_empty() {
        return Err(WeightsError::TooFewRegions { needed: 1, got: 0 });
    }
    if order == 0 {
        return Err(WeightsError::InvalidOrder);
    }
    let tol = options.snap_tolerance;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(WeightsError::InvalidSnap(tol));
    }
    for (id, region) in geometry.region_ids().iter().zip(geometry.regions()) {
        if !(region.area() > 0.0) {
            return Err(WeightsError::DegenerateGeometry(id.clone()));
        }
    }

    let mut vertex_owners: HashMap<Key, Vec<usize>> = HashMap::new();
    let mut edge_owners: HashMap<(Key, Key), Vec<usize>> = HashMap::new();
    for (r, region) in geometry.regions().iter().enumerate() {
        for poly in &region.polygons {
            for ring in poly.rings() {
                let keys: Vec<Key> = ring.iter().map(|&p| snap(p, tol)).collect();
                for &k in &keys {
                    push_owner(vertex_owners.entry(k).or_default(), r);
                }
                if rule == ContiguityRule::Rook {
                    for w in keys.windows(2) {
                        if w[0] != w[1] {
                            let e = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
                            push_owner(edge_owners.entry(e).or_default(), r);
                        }
                    }
                }
            }
        }
    }

    let mut adjacency = vec![Vec::new(); geometry.len()];
    let mut link = |owners: &[usize]| {
        for (a, &i) in owners.iter().enumerate() {
            for &j in &owners[a + 1..] {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    };
    match rule {
        ContiguityRule::Queen => vertex_owners.values().filter(|o| o.len() > 1).for_each(|o| link(o)),
        ContiguityRule::Rook => edge_owners.values().filter(|o| o.len() > 1).for_each(|o| link(o)),
    }
    let first = NeighborGraph::new(geometry.region_ids().to_vec(), adjacency)?;
    Ok(first.higher_order(order, options.exact_order))
}

fn push_owner(owners: &mut Vec<usize>, r: usize) {
    if owners.last() != Some(&r) && !owners.contains(&r) {
        owners.push(r);
    }
}

/// Haversine distance in kilometres between `(lon, lat)` points given in degrees.
pub fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lon1, lat1) = (a[0].to_radians(), a[1].to_radians());
    let (lon2, lat2) = (b[0].to_radians(), b[1].to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Dense inverse great-circle distance weights between region centroids, no cut-off.
pub fn build_inverse_distance(geometry: &GeometrySet) -> Result<WeightsMatrix, WeightsError> {
    inverse_distance_from_points(geometry.region_ids().to_vec(), &geometry.centroids())
}

pub fn inverse_distance_from_points(ids: Vec<String>, points: &[[f64; 2]]) -> Result<WeightsMatrix, WeightsError> {
    let n = ids.len();
    if n < 2 {
        return Err(WeightsError::TooFewRegions { needed: 2, got: n });
    }
    let rows: Vec<Result<Vec<(usize, usize, f64)>, (usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n - 1);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = haversine_km(points[i], points[j]);
                if !(d > 0.0) {
                    return Err((i.min(j), i.max(j)));
                }
                row.push((i, j, 1.0 / d));
            }
            Ok(row)
        })
        .collect();
    let mut trip = Vec::with_capacity(n * (n - 1));
    for r in rows {
        match r {
            Ok(row) => trip.extend(row),
            Err((i, j)) => return Err(WeightsError::CoincidentCentroids(ids[i].clone(), ids[j].clone())),
        }
    }
    WeightsMatrix::from_triplets(ids, trip, Normalization::None, Provenance::InverseDistance)
}

/// Row- or spectral-normalizes a weights matrix. Island rows stay zero under row
/// normalization.
pub fn normalize(w: &WeightsMatrix, scheme: Normalization) -> Result<WeightsMatrix, WeightsError> {
    if w.nnz() == 0 {
        return Err(WeightsError::ZeroMatrix);
    }
    match scheme {
        Normalization::None => Ok(w.clone()),
        Normalization::Row => {
            let islands = w.islands();
            if !islands.is_empty() {
                let names: Vec<&str> = islands.iter().map(|&i| w.region_ids()[i].as_str()).collect();
                log::warn!("{} island(s) keep all-zero rows: {}", names.len(), names.join(", "));
            }
            let mut vals = Vec::with_capacity(w.nnz());
            for i in 0..w.n() {
                let s: f64 = w.row(i).map(|(_, v)| v).sum();
                vals.extend(w.row(i).map(|(_, v)| v / s));
            }
            Ok(w.with_values(vals, Normalization::Row))
        }
        Normalization::Spectral => {
            let radius = w.spectral_radius();
            let vals = w.values().iter().map(|v| v / radius).collect();
            let out = w.with_values(vals, Normalization::Spectral);
            out.seed_spectrum(w.spectrum().scaled(1.0 / radius));
            Ok(out)
        }
    }
}

/// Counts describing a weights matrix's neighbour structure.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConnectivitySummary {
    pub n: usize,
    pub nonzero: usize,
    pub min_neighbors: usize,
    pub mean_neighbors: f64,
    pub max_neighbors: usize,
    pub islands: usize,
    pub island_ids: Vec<String>,
    pub symmetric: bool,
}

pub fn connectivity_summary(w: &WeightsMatrix) -> ConnectivitySummary {
    let counts: Vec<usize> = (0..w.n()).map(|i| w.row_len(i)).collect();
    let islands = w.islands();
    ConnectivitySummary {
        n: w.n(),
        nonzero: w.nnz(),
        min_neighbors: counts.iter().copied().min().unwrap_or(0),
        mean_neighbors: if w.n() == 0 { 0.0 } else { w.nnz() as f64 / w.n() as f64 },
        max_neighbors: counts.iter().copied().max().unwrap_or(0),
        islands: islands.len(),
        island_ids: islands.iter().map(|&i| w.region_ids()[i].clone()).collect(),
        symmetric: w.is_structurally_symmetric(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Polygon;

    fn square(x: f64, y: f64) -> Polygon {
        Polygon::new(vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0], [x, y]])
    }

    fn grid(rows: usize, cols: usize) -> GeometrySet {
        let mut items = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                items.push((format!("r{r}c{c}"), vec![square(c as f64, r as f64)]));
            }
        }
        GeometrySet::from_polygons(items).unwrap()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn rook_and_queen_on_2x2() {
        let g = grid(2, 2);
        let rook = build_contiguity(&g, ContiguityRule::Rook, 1, Default::default()).unwrap();
        let queen = build_contiguity(&g, ContiguityRule::Queen, 1, Default::default()).unwrap();
        assert_eq!(rook.n_edges(), 4);
        assert_eq!(queen.n_edges(), 6);
    }

    #[test]
    fn second_order_rook_on_3x3_matches_bfs() {
        let g = grid(3, 3);
        let rook = build_contiguity(&g, ContiguityRule::Rook, 1, Default::default()).unwrap();
        let rook2 = build_contiguity(&g, ContiguityRule::Rook, 2, Default::default()).unwrap();
        // center cell index 4; order-1 neighbours are 1,3,5,7; distance-2 adds the corners
        assert_eq!(rook.neighbors(4), &[1, 3, 5, 7]);
        assert_eq!(rook2.neighbors(4), &[0, 1, 2, 3, 5, 6, 7, 8]);
        // BFS oracle: grid distance is the Manhattan distance
        for i in 0..9 {
            let expect: Vec<usize> = (0..9)
                .filter(|&j| {
                    let d = (i / 3usize).abs_diff(j / 3) + (i % 3).abs_diff(j % 3);
                    j != i && d <= 2
                })
                .collect();
            assert_eq!(rook2.neighbors(i), expect.as_slice());
        }
        let exact = build_contiguity(
            &g,
            ContiguityRule::Rook,
            2,
            ContiguityOptions { exact_order: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(exact.neighbors(4), &[0, 2, 6, 8]);
    }

    #[test]
    fn disjoint_squares_are_islands() {
        let g = GeometrySet::from_polygons(vec![("a".into(), vec![square(0.0, 0.0)]), ("b".into(), vec![square(5.0, 5.0)])])
            .unwrap();
        let q = build_contiguity(&g, ContiguityRule::Queen, 1, Default::default()).unwrap();
        assert_eq!(q.n_edges(), 0);
        let w = WeightsMatrix::binary(&q, Provenance::Graph);
        assert_eq!(connectivity_summary(&w).islands, 2);
        assert!(matches!(normalize(&w, Normalization::Row), Err(WeightsError::ZeroMatrix)));
    }

    #[test]
    fn snapping_absorbs_float_noise() {
        let a = square(0.0, 0.0);
        let mut b = square(1.0, 0.0);
        for p in b.exterior.iter_mut() {
            if p[0] == 1.0 {
                p[0] += 3e-11;
            }
        }
        let g = GeometrySet::from_polygons(vec![("a".into(), vec![a]), ("b".into(), vec![b])]).unwrap();
        let rook = build_contiguity(&g, ContiguityRule::Rook, 1, Default::default()).unwrap();
        assert_eq!(rook.n_edges(), 1);
        let strict = build_contiguity(
            &g,
            ContiguityRule::Rook,
            1,
            ContiguityOptions { snap_tolerance: 1e-12, ..Default::default() },
        )
        .unwrap();
        assert_eq!(strict.n_edges(), 0);
    }

    #[test]
    fn degenerate_region_rejected() {
        let flat = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]);
        let g = GeometrySet::from_polygons(vec![("flat".into(), vec![flat])]).unwrap();
        assert!(matches!(
            build_contiguity(&g, ContiguityRule::Queen, 1, Default::default()),
            Err(WeightsError::DegenerateGeometry(ref id)) if id == "flat"
        ));
    }

    #[test]
    fn inverse_distance_definition() {
        // two points 100 km apart along a meridian
        let dlat = (100.0 / EARTH_RADIUS_KM).to_degrees();
        let w = inverse_distance_from_points(ids(2), &[[0.0, 0.0], [0.0, dlat]]).unwrap();
        assert!((w.get(0, 1) - 0.01).abs() < 1e-12);
        assert!((w.get(1, 0) - 0.01).abs() < 1e-12);

        let w = inverse_distance_from_points(ids(3), &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!((w.get(0, 2) - w.get(0, 1) / 2.0).abs() < 1e-6);
        // 1 degree of equatorial arc
        assert!((1.0 / w.get(0, 1) - 111.19).abs() < 0.01);
        assert_eq!(w.get(0, 0), 0.0);

        assert!(matches!(
            inverse_distance_from_points(ids(3), &[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]),
            Err(WeightsError::CoincidentCentroids(ref a, ref b)) if a == "0" && b == "2"
        ));
    }

    #[test]
    fn normalize_path() {
        let g = NeighborGraph::from_edges(ids(3), &[(0, 1), (1, 2)]).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph);
        let row = normalize(&w, Normalization::Row).unwrap();
        let d = row.to_dense();
        let expect = [[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, j)], expect[i][j]);
            }
        }
        // dense eigen oracle: largest eigenvalue of the 3-path is sqrt(2)
        let oracle = nalgebra::SymmetricEigen::new(w.to_dense()).eigenvalues.max();
        assert!((oracle - 2f64.sqrt()).abs() < 1e-12);
        let spec = normalize(&w, Normalization::Spectral).unwrap();
        for (i, j, v) in spec.triplets() {
            assert!((v - w.get(i, j) / oracle).abs() < 1e-15);
        }
        assert!(spec.is_symmetric(0.0));
        assert!((spec.spectral_radius() - 1.0).abs() < 1e-12);

        let cycle = WeightsMatrix::binary(&NeighborGraph::from_edges(ids(2), &[(0, 1)]).unwrap(), Provenance::Graph);
        let spec = normalize(&cycle, Normalization::Spectral).unwrap();
        assert_eq!(spec.get(0, 1), 1.0);
        assert_eq!(spec.get(1, 0), 1.0);
    }

    #[test]
    fn summary_of_path() {
        let g = NeighborGraph::from_edges(ids(3), &[(0, 1), (1, 2)]).unwrap();
        let s = connectivity_summary(&WeightsMatrix::binary(&g, Provenance::Graph));
        assert!((s.mean_neighbors - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!((s.min_neighbors, s.max_neighbors, s.islands), (1, 2, 0));
        assert!(s.symmetric);
    }

    #[test]
    fn stationary_interval_by_normalization() {
        let g = NeighborGraph::from_edges(ids(3), &[(0, 1), (1, 2)]).unwrap();
        let w = WeightsMatrix::binary(&g, Provenance::Graph);
        let row = w.normalize(Normalization::Row).unwrap();
        let (lo, hi) = row.stationary_interval();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let spec = w.normalize(Normalization::Spectral).unwrap();
        assert_eq!(spec.stationary_interval(), (-1.0, 1.0));
    }
}
